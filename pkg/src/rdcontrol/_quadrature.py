"""Vectorized adaptive Gauss-Kronrod quadrature and a golden-section minimizer.

The phase-plane length integrals are evaluated thousands of times during the
threshold scans, so the integrand is required to accept whole numpy arrays and
every refinement round evaluates all panels' nodes in a single call. The node
and weight tables are the standard 21-point Kronrod / 10-point Gauss pair;
tests pin the implementation against scipy.integrate.quad.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import NumericalError

# 21-point Kronrod abscissae (positive half) and weights, with the embedded
# 10-point Gauss weights on the even-indexed nodes
_XGK_HALF = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK_HALF = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG_HALF = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

_NODES = np.concatenate([-_XGK_HALF[:-1], _XGK_HALF[::-1]])  # 21 ascending
_WK = np.concatenate([_WGK_HALF[:-1], _WGK_HALF[::-1]])
_WG = np.zeros(21)
# Gauss nodes sit at the odd positions of the ascending 21-point rule
_WG[1:10:2] = _WG_HALF
_WG[11:20:2] = _WG_HALF[::-1]


def gk_panel(fn, lo: np.ndarray, hi: np.ndarray):
    """Kronrod and Gauss estimates on each panel [lo_i, hi_i].

    fn must map an ndarray to an ndarray of the same shape. Returns
    (kronrod, error) arrays, one entry per panel.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = fn(x.ravel()).reshape(x.shape)
    i_k = half * (vals @ _WK)
    i_g = half * (vals @ _WG)
    return i_k, np.abs(i_k - i_g)


def integrate_adaptive(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-14,
    max_panels: int = 8192,
    value_cap: Optional[float] = None,
) -> float:
    """Adaptive Gauss-Kronrod integral of fn over [a, b].

    Panels whose Gauss/Kronrod discrepancy exceeds their share of the error
    budget are bisected, all in one vectorized round. |I_K - I_G| is a strong
    overestimate of the K21 error, so the achieved accuracy is well past
    rel_tol in practice. If value_cap is given and the running value exceeds
    it in magnitude, returns math.inf-signaling cap overflow early (used for
    divergent length integrals).
    """
    if b == a:
        return 0.0
    if b < a:
        return -integrate_adaptive(fn, b, a, rel_tol, abs_tol, max_panels, value_cap)

    lo = np.array([a])
    hi = np.array([b])
    vals, errs = gk_panel(fn, lo, hi)
    # endpoint grading without extrapolation can take hundreds of cheap
    # rounds for x^(-p) tails, so the cap is generous
    for _ in range(512):
        total = float(np.sum(vals))
        target = max(abs_tol, rel_tol * abs(total))
        if value_cap is not None and total > value_cap:
            return np.inf
        bad = errs > target / max(len(lo), 1)
        if float(np.sum(errs)) <= target or not np.any(bad):
            return total
        if len(lo) > max_panels:
            raise NumericalError(
                f"quadrature did not converge with {len(lo)} panels "
                f"(err {float(np.sum(errs)):.3g}, target {target:.3g})"
            )
        keep_lo, keep_hi = lo[~bad], hi[~bad]
        keep_vals, keep_errs = vals[~bad], errs[~bad]
        mid = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate([keep_lo, lo[bad], mid])
        new_hi = np.concatenate([keep_hi, mid, hi[bad]])
        ref_vals, ref_errs = gk_panel(fn, np.concatenate([lo[bad], mid]),
                                      np.concatenate([mid, hi[bad]]))
        vals = np.concatenate([keep_vals, ref_vals])
        errs = np.concatenate([keep_errs, ref_errs])
        lo, hi = new_lo, new_hi
    raise NumericalError("quadrature refinement loop exceeded 512 rounds")


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_min(
    fn: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-9,
    max_iter: int = 200,
):
    """Golden-section minimum of a unimodal scalar function on [a, b].

    Returns (x, fn(x)). tol is on the bracket width relative to max(|a|,|b|,1).
    """
    scale = max(abs(a), abs(b), 1.0)
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(max_iter):
        if b - a <= tol * scale:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = fn(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)
