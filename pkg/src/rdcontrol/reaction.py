"""Reaction nonlinearities for the scalar equation y_t - y_xx = f(y).

A ReactionModel packages the function f together with the structural data the
controllability results rest on: which sign hypothesis holds, the middle zero
theta (bistable case), the potential F(y) = int_0^y f(s) ds, and the zero
theta1 of F on (theta, 1].

Conventions:
  * f(0) = f(1) = 0 and states live in [0, 1].
  * monostable: f > 0 on (0, 1) and f'(0) > 0.
  * bistable:   f < 0 on (0, theta), f > 0 on (theta, 1), f'(0) < 0 and
    f'(1) < 0, plus the normalization F(1) >= 0 (state 1 dominates state 0).
    Models with F(1) < 0 are rejected; the threshold theory does not apply.

Built-in models carry exact closed-form potentials. User-supplied models fall
back to adaptive quadrature for F, which is slower but keeps the same
contracts. All callables stored on a model accept numpy arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, ModelError

_CLASSIFY_GRID = 10_000
_ZERO_TOL = 1e-12
_INVERSE_TOL = 1e-12


class ModelKind(enum.Enum):
    MONOSTABLE = "monostable"
    BISTABLE = "bistable"


@dataclass(frozen=True)
class ReactionModel:
    """Immutable reaction term with its structural data.

    theta and theta1 are None for monostable models. F1 = F(1) >= 0 always
    holds for constructed models. big_f_exact, when present, is an array-aware
    exact antiderivative used instead of quadrature.
    """

    kind: ModelKind
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    F1: float
    theta: Optional[float] = None
    theta1: Optional[float] = None
    big_f_exact: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False
    )
    name: str = "custom"

    def __post_init__(self):
        if self.kind is ModelKind.BISTABLE:
            if self.theta is None or self.theta1 is None:
                raise ModelError("bistable model needs theta and theta1")
            if not 0.0 < self.theta < 1.0:
                raise ModelError(f"theta={self.theta} outside (0, 1)")
        if self.F1 < 0.0:
            raise ModelError(
                f"F(1) = {self.F1} < 0: state 1 does not dominate state 0"
            )


def logistic() -> ReactionModel:
    """Monostable logistic model f(y) = y (1 - y), F(y) = y^2/2 - y^3/3."""
    return ReactionModel(
        kind=ModelKind.MONOSTABLE,
        f=lambda y: y * (1.0 - y),
        f_prime=lambda y: 1.0 - 2.0 * y,
        F1=1.0 / 6.0,
        big_f_exact=lambda y: y * y * (0.5 - y / 3.0),
        name="logistic",
    )


def cubic(theta: float) -> ReactionModel:
    """Bistable cubic model f(y) = y (1 - y) (y - theta).

    Requires 0 < theta <= 1/2 so that F(1) = (1 - 2 theta)/12 >= 0. At
    theta = 1/2 the potential is balanced, F(1) = 0 and theta1 = 1.
    """
    if not 0.0 < theta < 1.0:
        raise ModelError(f"theta={theta} outside (0, 1)")
    F1 = (1.0 - 2.0 * theta) / 12.0
    if F1 < 0.0:
        raise ModelError(
            f"cubic(theta={theta}) has F(1) = {F1:.6g} < 0; "
            "only theta <= 1/2 satisfies the normalization"
        )

    def f(y):
        return y * (1.0 - y) * (y - theta)

    def f_prime(y):
        return -3.0 * y * y + 2.0 * (1.0 + theta) * y - theta

    def F(y):
        # int_0^y s(1-s)(s-theta) ds, exact Horner form
        return y * y * (-theta / 2.0 + y * ((1.0 + theta) / 3.0 - y / 4.0))

    if F1 == 0.0:
        theta1 = 1.0
    else:
        theta1 = brentq(F, theta, 1.0, xtol=1e-15, rtol=8.9e-16)
    return ReactionModel(
        kind=ModelKind.BISTABLE,
        f=f,
        f_prime=f_prime,
        F1=F1,
        theta=theta,
        theta1=theta1,
        big_f_exact=F,
        name=f"cubic(theta={theta:.17g})",
    )


def scale(model: ReactionModel, c: float) -> ReactionModel:
    """Model with reaction c * f, keeping the zeros of f (c >= 0).

    c = 0 yields the degenerate pure-diffusion model (f identically 0); it
    breaks the sign hypotheses and is meant only for validating the
    time-stepper against heat-kernel formulas, not for threshold analysis.
    """
    if c < 0.0:
        raise ModelError("scale factor must be nonnegative")
    f, fp = model.f, model.f_prime
    big = model.big_f_exact
    return ReactionModel(
        kind=model.kind,
        f=lambda y: c * f(y),
        f_prime=lambda y: c * fp(y),
        F1=c * model.F1,
        theta=model.theta,
        theta1=model.theta1,
        big_f_exact=None if big is None else (lambda y: c * big(y)),
        name=f"{model.name}*{c:g}",
    )


def _vectorize(fn):
    """Return an array-aware version of fn, wrapping scalar-only callables."""
    try:
        out = fn(np.array([0.25, 0.75]))
        if np.shape(out) == (2,):
            return fn
    except Exception:
        pass
    return np.vectorize(fn, otypes=[float])


def classify(
    f: Callable[[float], float],
    f_prime: Callable[[float], float],
    theta_hint: Optional[float] = None,
    name: str = "custom",
) -> ReactionModel:
    """Build a ReactionModel from a user-supplied nonlinearity.

    Samples f on a fine grid of (0, 1), decides between the monostable and
    bistable sign hypotheses, locates theta by root finding when bistable,
    and computes F(1) and theta1 by adaptive quadrature. Rejects f that fit
    neither hypothesis or violate F(1) >= 0.
    """
    f = _vectorize(f)
    f_prime = _vectorize(f_prime)

    if abs(float(f(0.0))) > _ZERO_TOL or abs(float(f(1.0))) > _ZERO_TOL:
        raise ModelError("f must vanish at 0 and 1")
    ys = np.linspace(0.0, 1.0, _CLASSIFY_GRID + 1)[1:-1]
    vals = np.asarray(f(ys), dtype=float)
    fp0 = float(f_prime(0.0))
    fp1 = float(f_prime(1.0))

    if np.all(vals > 0.0):
        if fp0 <= 0.0:
            raise ModelError("f > 0 on (0,1) but f'(0) <= 0: not monostable")
        F1 = _quad_F(f, 1.0)
        return ReactionModel(
            kind=ModelKind.MONOSTABLE, f=f, f_prime=f_prime, F1=F1, name=name
        )

    neg = vals < 0.0
    pos = vals > 0.0
    # bistable pattern: a negative block then a positive block
    if neg[0] and pos[-1]:
        first_pos = np.nonzero(pos)[0][0]
        # zeros are allowed only at the switch point itself (theta on a node)
        head = vals[:first_pos]
        head_zeros = np.nonzero(head == 0.0)[0]
        clean = (
            np.all(head <= 0.0)
            and np.all(vals[first_pos:] > 0.0)
            and (head_zeros.size == 0 or head_zeros.tolist() == [first_pos - 1])
        )
        if not clean:
            raise ModelError("sign pattern of f matches neither hypothesis")
        if fp0 >= 0.0 or fp1 >= 0.0:
            raise ModelError(
                "bistable sign pattern but f'(0) or f'(1) is not negative"
            )
        if head_zeros.size == 1:
            theta = float(ys[first_pos - 1])
        else:
            lo = ys[first_pos - 1]
            hi = ys[first_pos]
            if theta_hint is not None:
                d = 2.0 / _CLASSIFY_GRID
                clo = max(theta_hint - d, 0.0)
                chi = min(theta_hint + d, 1.0)
                if float(f(clo)) < 0.0 < float(f(chi)):
                    lo, hi = clo, chi
            theta = brentq(lambda y: float(f(y)), lo, hi, xtol=1e-15)
        F1 = _quad_F(f, 1.0)
        if F1 < -1e-10:
            raise ModelError(f"F(1) = {F1:.6g} < 0: normalization violated")
        F1 = max(F1, 0.0)
        if F1 == 0.0:
            theta1 = 1.0
        else:
            Ftheta_fn = lambda y: _quad_F(f, y)
            theta1 = brentq(Ftheta_fn, theta, 1.0, xtol=1e-14)
        return ReactionModel(
            kind=ModelKind.BISTABLE,
            f=f,
            f_prime=f_prime,
            F1=F1,
            theta=theta,
            theta1=theta1,
            name=name,
        )

    raise ModelError("sign pattern of f matches neither hypothesis")


def _quad_F(f, y: float) -> float:
    val, _ = quad(lambda s: float(f(s)), 0.0, y, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def big_f(model: ReactionModel, y):
    """Potential F(y) = int_0^y f(s) ds, exact for built-ins.

    Accepts scalars or arrays in [0, 1] (a 1e-9 slack absorbs scheme
    roundoff). User-supplied models integrate adaptively to 1e-12.
    """
    arr = np.asarray(y, dtype=float)
    if np.any(arr < -1e-9) or np.any(arr > 1.0 + 1e-9):
        raise DomainError(f"big_f argument outside [0, 1]: {y}")
    if model.big_f_exact is not None:
        out = model.big_f_exact(arr)
    else:
        out = np.array([_quad_F(model.f, float(v)) for v in np.atleast_1d(arr)])
        out = out.reshape(arr.shape)
    return float(out) if np.isscalar(y) or arr.shape == () else out


def lower_branch_point(model: ReactionModel) -> float:
    """Left end of the increasing branch of F used for inversion."""
    return 0.0 if model.kind is ModelKind.MONOSTABLE else model.theta1


def f_inverse_upper(model: ReactionModel, alpha) -> float:
    """Invert F on its increasing branch up to 1.

    The branch is [0, 1] for monostable models and [theta1, 1] for bistable
    ones; alpha must lie in [0, F(1)]. The result y satisfies
    |F(y) - alpha| <= 1e-12.
    """
    scalar = np.isscalar(alpha) or np.shape(alpha) == ()
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any(a < -1e-15) or np.any(a > model.F1 + 1e-15):
        raise DomainError(f"alpha outside [0, F(1)={model.F1:.8g}]: {alpha}")
    a = np.clip(a, 0.0, model.F1)
    lo = lower_branch_point(model)
    out = invert_increasing(lambda v: big_f(model, v), lo, 1.0, a)
    # F is quadratically flat at 1 (f(1) = 0), so queries within a few ulp of
    # F(1) cannot be resolved by bisection; snap them to the endpoint
    snap = 8.0 * np.finfo(float).eps * max(model.F1, 1.0e-30)
    out = np.where(model.F1 - a <= snap, 1.0, out)
    return float(out[0]) if scalar else out


def invert_increasing(F, lo: float, hi: float, targets: np.ndarray) -> np.ndarray:
    """Vectorized inversion of an increasing function on [lo, hi].

    Plain bisection to near machine precision; robust for every model the
    package accepts and fast because F is evaluated on whole arrays.
    """
    t = np.asarray(targets, dtype=float)
    a = np.full_like(t, lo)
    b = np.full_like(t, hi)
    # 80 halvings take the bracket below 1e-24 * (hi - lo)
    for _ in range(80):
        mid = 0.5 * (a + b)
        high = np.asarray(F(mid)) > t
        b = np.where(high, mid, b)
        a = np.where(high, a, mid)
    return 0.5 * (a + b)


def lipschitz_bound(model: ReactionModel) -> float:
    """max |f'| over [0, 1], by dense sampling with a safety-free exact grid."""
    ys = np.linspace(0.0, 1.0, 4097)
    return float(np.max(np.abs(model.f_prime(ys))))
