"""Phase-plane analysis of the stationary equation -w'' = f(w) on (0, L).

Solutions of the stationary problem are trajectories of the Hamiltonian
system w' = p, p' = -f(w) with conserved energy E = p^2/2 + F(w). The length
thresholds of the controllability theory are arc lengths of such trajectories:

  * length_of_alpha(alpha): length of the excursion from w=0 up to the
    turning point F^{-1}(alpha) and back, L(alpha) = sqrt(2) *
    int_0^{F^{-1}(alpha)} dy / sqrt(alpha - F(y)).
  * l_star: inf of L(alpha) over alpha in (0, F(1)). Domains shorter than
    l_star admit no nonzero steady state vanishing at both ends.
  * l_theta: minimal length of a first return to the level theta, over
    excursions above and below theta (bistable only).
  * l_a: minimal return length to the level a over trajectories starting on
    or outside the homoclinic region Gamma.

Each integrand is desingularized before quadrature: the path is split at the
half-energy level and the final rise to the turning point is integrated in
the momentum variable t = sqrt(E - F(y)), where dy/sqrt(E - F(y)) = 2 dt /
f(y(t)). Both pieces are then smooth and bounded whenever f is positive at
the turning point, which holds strictly inside the alpha domain.

Infinite lengths are reported as math.inf sentinels, never raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from ._quadrature import golden_min, integrate_adaptive
from .errors import DomainError, FeasibilityError, NumericalError
from .reaction import ModelKind, ReactionModel, invert_increasing

LENGTH_CAP = 1e6
_ENERGY_TOL = 1e-12
# excursion beyond [0, 1] that counts as leaving the admissible band; loose
# enough that a root grazing the boundary at x = L is not flagged as an exit
_EXIT_TOL = 1e-8


@dataclass(frozen=True)
class PhasePoint:
    """A point (w, w') in the stationary phase plane with w in [0, 1]."""

    w: float
    p: float

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise DomainError(f"phase point w={self.w} outside [0, 1]")


@dataclass(frozen=True)
class SteadyState:
    """A stationary profile sampled on a uniform grid.

    left_control and right_control are the boundary values a steady-state
    control has to hold to make the profile stationary. derivs carries w'
    from the integrator (not finite-differenced). exit_x is None when the
    trajectory stayed inside [0, 1]; otherwise the profile is truncated at
    the exit abscissa and the state is not admissible.
    """

    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    left_control: float
    right_control: float
    init: PhasePoint
    energy: float
    exit_x: Optional[float] = None

    @property
    def admissible(self) -> bool:
        return self.exit_x is None


@dataclass(frozen=True)
class SteadyPath:
    """A discrete continuous-in-s family of steady states joining two of them.

    states[k] corresponds to s_values[k]; controls[k] = (u_k, v_k) are its
    boundary values. Consecutive profiles differ by at most the gap the
    builder was asked to enforce.
    """

    s_values: np.ndarray
    states: List[SteadyState]
    controls: List[Tuple[float, float]]


@dataclass(frozen=True)
class ThresholdInfo:
    """A threshold value plus where (and whether) the infimum is attained."""

    value: float
    attained: bool
    argmin: Optional[float]


def energy(model: ReactionModel, point: PhasePoint) -> float:
    """Conserved energy p^2/2 + F(w) of the stationary system."""
    return 0.5 * point.p * point.p + float(_fast_big_f(model)(np.array([point.w]))[0])


def in_gamma(model: ReactionModel, point: PhasePoint) -> bool:
    """Whether (w, p) lies in the trapping region |p| <= sqrt(-2 F(w)).

    Only defined for bistable models and w <= theta1, where F <= 0. The
    region is exactly the set of nonpositive-energy states; trajectories
    inside it stay in [0, theta1] forever.
    """
    if model.kind is not ModelKind.BISTABLE:
        raise DomainError("Gamma region is only defined for bistable models")
    if point.w > model.theta1 + 1e-12:
        raise DomainError(
            f"w={point.w} beyond theta1={model.theta1:.8g}: outside Gamma's range"
        )
    return energy(model, point) <= _ENERGY_TOL


# cached fast potential per model (exact for built-ins, spline of a
# vectorized Gauss-Kronrod cumulative integral of f otherwise)
_FAST_F_CACHE: dict = {}


def _fast_big_f(model: ReactionModel) -> Callable[[np.ndarray], np.ndarray]:
    if model.big_f_exact is not None:
        return model.big_f_exact
    key = id(model)
    cached = _FAST_F_CACHE.get(key)
    if cached is not None and cached[0] is model:
        return cached[1]
    from scipy.interpolate import CubicSpline

    from ._quadrature import _NODES, _WK

    n = 4096
    edges = np.linspace(0.0, 1.0, n + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    pieces = half * (model.f(x.ravel()).reshape(x.shape) @ _WK)
    Fvals = np.concatenate([[0.0], np.cumsum(pieces)])
    spline = CubicSpline(
        edges, Fvals, bc_type=((1, float(model.f(0.0))), (1, float(model.f(1.0))))
    )
    fn = lambda y: spline(y)
    # keep a strong ref to the model so id() keys cannot collide after gc
    _FAST_F_CACHE[key] = (model, fn)
    return fn


def _arc_integral(G, g, y_base, seg_lo, y_turn, E, rel_tol=1e-9):
    """int_{y_base}^{y_turn} dy / sqrt(E - G(y)), desingularized.

    Assumes G(y_turn) = E with E - G > 0 on [y_base, y_turn), G increasing
    with derivative g > 0 on the final segment [seg_lo, y_turn], and
    G <= G(seg_lo) giving the split reference level. Returns math.inf when
    the value exceeds LENGTH_CAP.
    """
    if y_turn <= y_base:
        return 0.0
    m = float(G(np.array([seg_lo]))[0])
    if E - m <= 0.0:
        return 0.0
    split = 0.5 * (E + m)
    y_s = float(invert_increasing(G, seg_lo, y_turn, np.array([split]))[0])
    y_s = min(max(y_s, y_base), y_turn)

    head = 0.0
    if y_s > y_base:
        def head_fn(y):
            return 1.0 / np.sqrt(np.maximum(E - G(y), 1e-300))

        head = integrate_adaptive(
            head_fn, y_base, y_s, rel_tol=rel_tol, value_cap=LENGTH_CAP
        )
        if not np.isfinite(head):
            return math.inf

    t_s = math.sqrt(max(E - split, 0.0))

    def tail_fn(t):
        y = invert_increasing(G, y_s, y_turn, E - t * t)
        return 2.0 / g(y)

    tail = integrate_adaptive(
        tail_fn, 0.0, t_s, rel_tol=rel_tol, value_cap=LENGTH_CAP
    )
    total = head + tail
    return total if total <= LENGTH_CAP and np.isfinite(total) else math.inf


def _upper_turning_point(model: ReactionModel, E: float) -> float:
    """Inverse of F on the increasing branch reaching 1, using the fast F."""
    F = _fast_big_f(model)
    lo = 0.0 if model.kind is ModelKind.MONOSTABLE else model.theta
    return float(invert_increasing(F, lo, 1.0, np.array([E]))[0])


def length_of_alpha(model: ReactionModel, alpha: float) -> float:
    """Arc length of the zero-based excursion with energy alpha.

    L(alpha) = sqrt(2) int_0^{F^{-1}(alpha)} dy / sqrt(alpha - F(y)), the
    domain length a steady state with w(0) = w(L) = 0 and max height
    F^{-1}(alpha) occupies. Diverges (returns math.inf) at alpha = F(1);
    alpha outside (0, F(1)] is a domain error. Relative accuracy 1e-8.
    """
    F1 = model.F1
    if F1 <= 0.0:
        raise DomainError("F(1) = 0: no positive-energy excursions exist")
    if not 0.0 < alpha <= F1 * (1.0 + 1e-14):
        raise DomainError(f"alpha={alpha} outside (0, F(1)={F1:.8g}]")
    if F1 - alpha <= 8.0 * np.finfo(float).eps * F1:
        return math.inf
    Ff = _fast_big_f(model)
    seg_lo = 0.0 if model.kind is ModelKind.MONOSTABLE else model.theta
    y_turn = _upper_turning_point(model, alpha)
    val = _arc_integral(Ff, model.f, 0.0, seg_lo, y_turn, alpha)
    return math.sqrt(2.0) * val if np.isfinite(val) else math.inf


def _scan_and_refine(fn, xs, boundary_low_limit=None):
    """Minimize fn over the grid xs, golden-refining an interior argmin.

    Returns (value, argmin, attained). If the grid argmin sits at the first
    point and boundary_low_limit is given, that limit is reported instead
    with attained=False.
    """
    vals = np.array([fn(x) for x in xs])
    i = int(np.argmin(vals))
    if i == 0 and boundary_low_limit is not None:
        limit = boundary_low_limit()
        if limit <= vals[0]:
            return limit, None, False
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]
    x_best, v_best = golden_min(fn, lo, hi, tol=1e-10)
    if vals[i] < v_best:
        x_best, v_best = xs[i], vals[i]
    return float(v_best), float(x_best), True


def l_star_info(model: ReactionModel) -> ThresholdInfo:
    """Threshold length inf_alpha L(alpha) with attainment information.

    Bistable models attain the infimum at an interior alpha; monostable
    models satisfying the classical monotonicity condition have the infimum
    only in the limit alpha -> 0, reported with attained=False via
    Richardson extrapolation of the sqrt(alpha) correction. A balanced
    bistable model (F(1) = 0) has no excursions at all: value = inf.
    """
    F1 = model.F1
    if F1 <= 0.0:
        return ThresholdInfo(math.inf, False, None)
    alphas = F1 * np.geomspace(1e-6, 0.999, 128)
    fn = lambda a: length_of_alpha(model, a)

    def alpha_zero_limit():
        # L(alpha) = L0 + c sqrt(alpha) + d alpha + o(alpha): three samples
        # on a 4:1 ladder cancel both correction terms
        a_r = F1 * 4e-5
        l1, l2, l3 = fn(a_r), fn(a_r / 4.0), fn(a_r / 16.0)
        return (8.0 * l3 - 6.0 * l2 + l1) / 3.0

    boundary = alpha_zero_limit if model.kind is ModelKind.MONOSTABLE else None
    value, argmin, attained = _scan_and_refine(fn, alphas, boundary)
    return ThresholdInfo(value, attained, argmin)


def l_star(model: ReactionModel) -> float:
    """Threshold length below which no nonzero zero-based steady state fits."""
    return l_star_info(model).value


def l_star_lower_bound(model: ReactionModel) -> float:
    """Spectral lower bound pi / sqrt(max_y f(y)/y) for l_star.

    The ratio is extended continuously by f'(0) at y = 0 (where the sup may
    live, e.g. for the logistic model). The maximum is located on a dense
    grid and golden-refined.
    """
    def ratio(y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        small = y < 1e-12
        out[small] = model.f_prime(np.zeros(np.count_nonzero(small)))
        ys = y[~small]
        out[~small] = model.f(ys) / ys
        return out

    ys = np.linspace(0.0, 1.0, 10001)
    vals = ratio(ys)
    i = int(np.argmax(vals))
    lo, hi = ys[max(i - 1, 0)], ys[min(i + 1, len(ys) - 1)]
    x, neg = golden_min(lambda y: -float(ratio(np.array([y]))[0]), lo, hi, tol=1e-12)
    best = max(float(vals[i]), -neg)
    if best <= 0.0:
        raise DomainError("f(y)/y has no positive maximum on (0, 1]")
    return math.pi / math.sqrt(best)


def _theta_shift_branches(model: ReactionModel):
    """Shifted potentials for excursions above and below theta.

    Above: G(y) = F(y) - F(theta) increasing on [theta, 1].
    Below, reflected through theta with z = theta - y: G(z) = F(theta - z)
    - F(theta) increasing on [0, theta].
    """
    F = _fast_big_f(model)
    th = model.theta
    F_th = float(F(np.array([th]))[0])
    up_G = lambda y: F(y) - F_th
    up_g = model.f
    lo_G = lambda z: F(th - z) - F_th
    lo_g = lambda z: -model.f(th - z)
    return (up_G, up_g), (lo_G, lo_g), F_th


def length_to_theta(model: ReactionModel, beta: float) -> float:
    """First-return length to the level theta of the excursion peaking at beta.

    sqrt(2) |int_theta^beta dy / sqrt(F(beta) - F(y))| for beta in (0, 1),
    beta != theta; excursions above theta have beta > theta, below have
    beta < theta. Diverges at beta -> 0 and beta -> 1.
    """
    if model.kind is not ModelKind.BISTABLE:
        raise DomainError("theta excursions require a bistable model")
    th = model.theta
    if not 0.0 < beta < 1.0 or beta == th:
        raise DomainError(f"beta={beta} outside (0,1) minus theta")
    (up_G, up_g), (lo_G, lo_g), _ = _theta_shift_branches(model)
    if beta > th:
        E = float(up_G(np.array([beta]))[0])
        val = _arc_integral(up_G, up_g, th, th, beta, E)
    else:
        z_turn = th - beta
        E = float(lo_G(np.array([z_turn]))[0])
        val = _arc_integral(lo_G, lo_g, 0.0, 0.0, z_turn, E)
    return math.sqrt(2.0) * val if np.isfinite(val) else math.inf


def l_theta_info(model: ReactionModel) -> ThresholdInfo:
    """Minimal first-return length to theta over both excursion branches.

    The branch infima are compared against the analytic beta -> theta limit
    pi / sqrt(f'(theta)) (the half-period of the linearized center), which is
    the infimum whenever both branches are monotone away from theta.
    """
    if model.kind is not ModelKind.BISTABLE:
        raise DomainError("l_theta requires a bistable model")
    th = model.theta
    center = math.pi / math.sqrt(float(model.f_prime(np.array([th]))[0]))
    fn = lambda b: length_to_theta(model, b)

    up_grid = th + (1.0 - th) * np.linspace(1e-3, 1.0 - 1e-3, 128)
    v_up, b_up, _ = _scan_and_refine(fn, up_grid)
    lo_grid = th - th * np.linspace(1e-3, 1.0 - 1e-3, 128)
    v_lo, b_lo, _ = _scan_and_refine(fn, lo_grid)

    value, argmin, attained = min(
        (v_up, b_up, True), (v_lo, b_lo, True), (center, th, False),
        key=lambda t: t[0],
    )
    return ThresholdInfo(value, attained, argmin)


def l_theta(model: ReactionModel) -> float:
    """Minimal domain length carrying a steady state pinned to theta at both ends."""
    return l_theta_info(model).value


def l_theta_lower_bound(model: ReactionModel) -> float:
    """Spectral bound pi / sqrt(max_z |f(theta + z)/z|), the theta-shifted
    analogue of l_star_lower_bound, extended by f'(theta) at z = 0."""
    if model.kind is not ModelKind.BISTABLE:
        raise DomainError("l_theta bound requires a bistable model")
    th = model.theta

    def ratio(z):
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        small = np.abs(z) < 1e-12
        out[small] = model.f_prime(np.full(np.count_nonzero(small), th))
        zs = z[~small]
        out[~small] = np.abs(model.f(th + zs) / zs)
        return out

    zs = np.linspace(-th, 1.0 - th, 10001)
    vals = ratio(zs)
    i = int(np.argmax(vals))
    lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, len(zs) - 1)]
    x, neg = golden_min(lambda z: -float(ratio(np.array([z]))[0]), lo, hi, tol=1e-12)
    best = max(float(vals[i]), -neg)
    return math.pi / math.sqrt(best)


def return_length(model: ReactionModel, a: float, E: float) -> float:
    """Length of the excursion from level a with energy E, back to a.

    The trajectory launches upward from w = a with p = sqrt(2 (E - F(a))),
    turns at F^{-1}(E) and returns. Requires E >= 0 (on or outside Gamma)
    and E < F(1); E = F(1) diverges.
    """
    if model.kind is not ModelKind.BISTABLE:
        raise DomainError("return lengths to a level require a bistable model")
    F = _fast_big_f(model)
    F1 = model.F1
    Fa = float(F(np.array([a]))[0])
    if E < -1e-15 or E > F1 * (1.0 + 1e-14):
        raise DomainError(f"energy {E} outside [0, F(1)]")
    E = min(max(E, 0.0), F1)
    if E - Fa <= 0.0:
        return 0.0
    if F1 - E <= 8.0 * np.finfo(float).eps * max(F1, 1e-30):
        return math.inf
    y_turn = _upper_turning_point(model, E)
    seg_lo = max(a, model.theta)
    val = _arc_integral(F, model.f, a, seg_lo, y_turn, E)
    return math.sqrt(2.0) * val if np.isfinite(val) else math.inf


def l_a(model: ReactionModel, a: float) -> float:
    """Minimal return length to the level a over on-or-outside-Gamma starts.

    Trajectories start at w(0) = a with sqrt(-2 F(a)) <= w'(0) <=
    sqrt(2 (F(1) - F(a))), i.e. energies E in [0, F(1)]. l_a(0) coincides
    with l_star; for a in (0, theta1) the value gates how long a domain can
    be before steady states through level a stop being confined to Gamma.
    """
    if model.kind is not ModelKind.BISTABLE:
        raise DomainError("l_a requires a bistable model")
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"a={a} outside [0, 1]")
    F1 = model.F1
    if F1 <= 0.0:
        return math.inf
    fn = lambda E: return_length(model, a, E)
    energies = F1 * np.geomspace(1e-6, 0.999, 127)
    if a > 0.0:
        vals = [fn(0.0)] + [fn(E) for E in energies]
        grid = np.concatenate([[0.0], energies])
    else:
        vals = [fn(E) for E in energies]
        grid = energies
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    E_best, v_best = golden_min(fn, lo, hi, tol=1e-10)
    return float(min(v_best, vals[i]))


# fourth-order symmetric (Yoshida) composition of velocity Verlet steps;
# symplectic, so the energy p^2/2 + F(w) is preserved to O(h^4) uniformly
_Y4_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_Y4_W0 = 1.0 - 2.0 * _Y4_W1
_Y4_SUBSTEPS = (_Y4_W1, _Y4_W0, _Y4_W1)


def _propagate_scalar(f, w0, p0, length, n_steps, record_stride=None):
    """Single-trajectory variant of propagate in plain float arithmetic.

    The batch integrator pays a numpy dispatch cost per operation that
    dominates for one trajectory; this loop is ~50x faster there and is what
    makes shooting-root polish and profile refinement cheap.
    """
    w = float(w0)
    p = float(p0)
    h = length / n_steps
    exit_x = math.nan
    alive = True
    record = record_stride is not None
    if record:
        n_rec = n_steps // record_stride + 1
        W = np.empty((n_rec, 1))
        P = np.empty((n_rec, 1))
        xs = np.empty(n_rec)
        W[0, 0], P[0, 0], xs[0] = w, p, 0.0
        ri = 1
    force = -float(f(w))
    for k in range(n_steps):
        if alive:
            w_prev = w
            for c in _Y4_SUBSTEPS:
                hc = h * c
                p += 0.5 * hc * force
                w += hc * p
                force = -float(f(w))
                p += 0.5 * hc * force
            if w < -_EXIT_TOL or w > 1.0 + _EXIT_TOL:
                # freeze at the raw crossed value so w(L) - b keeps a
                # meaningful sign for shooting brackets near grazing roots
                tgt = 1.0 if w > 0.5 else 0.0
                denom = w - w_prev
                frac = min(max((tgt - w_prev) / denom, 0.0), 1.0) if denom else 0.0
                exit_x = (k + frac) * h
                alive = False
        if record and (k + 1) % record_stride == 0:
            W[ri, 0], P[ri, 0], xs[ri] = w, p, (k + 1) * h
            ri += 1
    result = {
        "w": np.array([w]),
        "p": np.array([p]),
        "exit_x": np.array([exit_x]),
    }
    if record:
        result.update(xs=xs, W=W[:ri], P=P[:ri])
    return result


def propagate(
    model: ReactionModel,
    w0,
    p0,
    length: float,
    n_steps: int,
    record_stride: Optional[int] = None,
):
    """Integrate the stationary system w' = p, p' = -f(w) over [0, length].

    w0, p0 may be arrays (a batch of trajectories advanced in lockstep).
    Trajectories are frozen at their state just before leaving [0, 1] in w;
    exit_x records where they crossed (linear interpolation), NaN for
    trajectories that never exited. With record_stride=k every k-th state is
    stored and returned as arrays of shape (n_samples, batch).

    Returns a dict with final 'w', 'p', 'exit_x', and optionally 'xs',
    'W', 'P'.
    """
    w = np.atleast_1d(np.asarray(w0, dtype=float)).copy()
    p = np.atleast_1d(np.asarray(p0, dtype=float)).copy()
    if w.size == 1:
        return _propagate_scalar(
            model.f, w[0], p[0], length, n_steps, record_stride
        )
    h = length / n_steps
    exit_x = np.full(w.shape, np.nan)
    alive = np.ones(w.shape, dtype=bool)
    record = record_stride is not None
    if record:
        n_rec = n_steps // record_stride + 1
        W = np.empty((n_rec, w.size))
        P = np.empty((n_rec, w.size))
        xs = np.empty(n_rec)
        W[0], P[0], xs[0] = w, p, 0.0
        ri = 1
    f = model.f
    force = -f(w)
    for k in range(n_steps):
        w_prev = w.copy()
        for c in _Y4_SUBSTEPS:
            hc = h * c
            p_half = p + 0.5 * hc * force
            w_new = np.where(alive, w + hc * p_half, w)
            force = -f(w_new)
            p = np.where(alive, p_half + 0.5 * hc * force, p)
            w = w_new
        out = alive & ((w < -_EXIT_TOL) | (w > 1.0 + _EXIT_TOL))
        if np.any(out):
            # linear backtrack to the boundary that was crossed; keep the raw
            # crossed value so shooting residuals retain their sign
            tgt = np.where(w > 0.5, 1.0, 0.0)
            denom = np.where(out, w - w_prev, 1.0)
            frac = np.clip((tgt - w_prev) / denom, 0.0, 1.0)
            exit_x = np.where(out, (k + frac) * h, exit_x)
            alive &= ~out
            force = -f(w)
        if record and (k + 1) % record_stride == 0:
            W[ri], P[ri], xs[ri] = w, p, (k + 1) * h
            ri += 1
    result = {"w": w, "p": p, "exit_x": exit_x}
    if record:
        result.update(xs=xs, W=W[:ri], P=P[:ri])
    return result


def integrate_stationary(
    model: ReactionModel,
    init: PhasePoint,
    length: float,
    n: int = 2048,
    tol: float = 1e-9,
    max_points: int = 8192,
) -> SteadyState:
    """Stationary profile through init over [0, length], step-doubled until
    two consecutive resolutions agree to tol in max norm and the sampled
    energy drift is below 1e-8. The returned grid holds at most max_points+1
    samples of the converged run.
    """
    if length <= 0.0:
        raise DomainError("length must be positive")
    n = max(64, n)
    prev = None
    for _ in range(12):
        stride = max(1, n // max_points)
        res = propagate(model, init.w, init.p, length, n, record_stride=stride)
        if prev is not None:
            common = max(1, (len(res["W"]) - 1) // (len(prev["W"]) - 1))
            diff = np.max(np.abs(res["W"][::common, 0] - prev["W"][:, 0]))
            Fw = _fast_big_f(model)(np.clip(res["W"][:, 0], 0.0, 1.0))
            E = 0.5 * res["P"][:, 0] ** 2 + Fw
            drift = np.max(np.abs(E - E[0]))
            exited = not np.isnan(res["exit_x"][0])
            if diff <= tol and (drift <= 1e-8 or exited):
                break
        prev = res
        n *= 2
    else:
        raise NumericalError("stationary integration did not converge")
    e0 = 0.5 * init.p**2 + float(_fast_big_f(model)(np.array([init.w]))[0])
    exit_x = res["exit_x"][0]
    return SteadyState(
        grid=res["xs"],
        values=np.clip(res["W"][:, 0], 0.0, 1.0),
        derivs=res["P"][:, 0],
        left_control=float(res["W"][0, 0]),
        right_control=float(res["W"][-1, 0]),
        init=init,
        energy=e0,
        exit_x=None if np.isnan(exit_x) else float(exit_x),
    )


def _shoot_final(model, a, p_arr, length, n_steps):
    """Final height w(length) for a batch of launch slopes (frozen on exit)."""
    res = propagate(model, np.full(len(p_arr), float(a)), p_arr, length, n_steps)
    return res["w"], res["exit_x"]


def _shoot_one(model, a, p, length, n_steps):
    res = _propagate_scalar(model.f, a, p, length, n_steps)
    return float(res["w"][0])


def find_stationary_solutions(
    model: ReactionModel,
    a: float,
    b: float,
    length: float,
    n_scan: int = 2048,
) -> List[SteadyState]:
    """All stationary profiles with w(0) = a, w(L) = b staying in [0, 1].

    Scans the admissible launch slopes |w'(0)| <= sqrt(2 (F(1) - F(a))) on a
    uniform grid, brackets sign changes of w(L) - b, polishes each root by
    bisection (to 1e-10 in w'(0)) plus a secant refinement on a finer grid,
    and always includes the exact constant solutions when a = b is a zero
    of f. Profiles that leave [0, 1] or miss b by more than 1e-8 after the
    converged re-integration are discarded.
    """
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise DomainError("boundary values must lie in [0, 1]")
    if length <= 0.0:
        raise DomainError("length must be positive")
    F = _fast_big_f(model)
    Fa = float(F(np.array([a]))[0])
    p_max = math.sqrt(max(2.0 * (model.F1 - Fa), 0.0))

    solutions: List[SteadyState] = []
    roots: List[float] = []

    if a == b and abs(float(model.f(np.array([a]))[0])) <= 1e-15:
        grid = np.linspace(0.0, length, 2049)
        solutions.append(
            SteadyState(
                grid=grid,
                values=np.full_like(grid, a),
                derivs=np.zeros_like(grid),
                left_control=a,
                right_control=a,
                init=PhasePoint(a, 0.0),
                energy=Fa,
                exit_x=None,
            )
        )
        roots.append(0.0)

    if p_max > 0.0:
        n_coarse = 4096
        ps = np.linspace(-p_max, p_max, n_scan)
        wL, exit_x = _shoot_final(model, a, ps, length, n_coarse)
        # exited trajectories keep their frozen overshoot value, so grazing
        # roots (b on the boundary) still produce a sign change
        resid = wL - b
        brackets = []
        for i in range(len(ps) - 1):
            if resid[i] == 0.0:
                brackets.append((ps[i], ps[i]))
            elif resid[i] * resid[i + 1] < 0.0:
                brackets.append((ps[i], ps[i + 1]))
        if resid[-1] == 0.0:
            brackets.append((ps[-1], ps[-1]))

        n_fine = int(2 ** math.ceil(math.log2(max(16384.0, length * 2048.0))))
        for p_lo, p_hi in brackets:
            # bisection on the scan-resolution map down to 1e-10 in w'(0)
            r_lo = _shoot_one(model, a, p_lo, length, n_coarse) - b
            while p_hi - p_lo > 1e-10:
                mid = 0.5 * (p_lo + p_hi)
                r_mid = _shoot_one(model, a, mid, length, n_coarse) - b
                if r_lo * r_mid <= 0.0:
                    p_hi = mid
                else:
                    p_lo, r_lo = mid, r_mid
            cand = 0.5 * (p_lo + p_hi)

            # secant polish against a finer map so the converged forward
            # integration of the root lands on b despite saddle stretching
            q0 = cand
            q1 = cand + 1e-7 * max(p_max, 1.0)
            r0 = _shoot_one(model, a, q0, length, n_fine) - b
            r1 = _shoot_one(model, a, q1, length, n_fine) - b
            for _ in range(8):
                denom = r1 - r0
                if abs(denom) < 1e-300:
                    break
                q2 = min(max(q1 - r1 * (q1 - q0) / denom, -p_max), p_max)
                q0, r0 = q1, r1
                q1 = q2
                r1 = _shoot_one(model, a, q1, length, n_fine) - b
                if abs(q1 - q0) < 1e-13:
                    break
            p_root = q1 if abs(r1) <= abs(r0) else q0
            if any(abs(p_root - r) <= 1e-8 for r in roots):
                continue
            state = integrate_stationary(model, PhasePoint(a, float(p_root)), length)
            if not state.admissible:
                continue
            if abs(state.values[-1] - b) > 1e-8:
                continue
            roots.append(float(p_root))
            solutions.append(state)

    solutions.sort(key=lambda s: s.init.p)
    return solutions


def build_path_to_theta(
    model: ReactionModel,
    y_init: SteadyState,
    length: float,
    n_steps: int = 64,
    eps_path: float = 0.02,
    max_refine: int = 5,
) -> SteadyPath:
    """Straight-line steady-state path from y_init to the constant theta.

    Initial conditions are interpolated linearly in the phase plane,
    c(s) = (1-s) (w0, p0) + s (theta, 0), each integrated over [0, length].
    n_steps doubles until consecutive profiles differ by at most eps_path in
    max norm. Raises FeasibilityError if any state leaves [0, 1] or its
    boundary controls leave (0, 1).
    """
    if model.kind is not ModelKind.BISTABLE:
        raise DomainError("the theta path requires a bistable model")
    th = model.theta
    w0, p0 = y_init.init.w, y_init.init.p

    for _ in range(max_refine + 1):
        s = np.linspace(0.0, 1.0, n_steps + 1)
        winit = (1.0 - s) * w0 + s * th
        pinit = (1.0 - s) * p0
        n_int = 8192
        res = propagate(model, winit, pinit, length, n_int,
                        record_stride=max(1, n_int // 4096))
        ref = propagate(model, winit, pinit, length, 2 * n_int,
                        record_stride=max(1, 2 * n_int // 4096))
        if np.max(np.abs(res["W"] - ref["W"])) > 1e-9:
            res = ref  # second resolution is plenty for these bounded arcs
        gaps = np.max(np.abs(np.diff(res["W"], axis=1)), axis=0)
        if np.max(gaps) <= eps_path:
            break
        n_steps *= 2
    else:
        raise FeasibilityError(
            f"path gaps stay above {eps_path} after {max_refine} refinements"
        )

    bad = np.nonzero(~np.isnan(res["exit_x"]))[0]
    if bad.size:
        raise FeasibilityError(
            f"path state s={s[bad[0]]:.4g} leaves [0, 1] (exit at "
            f"x={res['exit_x'][bad[0]]:.4g})"
        )
    states: List[SteadyState] = []
    controls: List[Tuple[float, float]] = []
    Ffast = _fast_big_f(model)
    for j in range(len(s)):
        u, v = float(res["W"][0, j]), float(res["W"][-1, j])
        if not (0.0 < u < 1.0 and 0.0 < v < 1.0):
            raise FeasibilityError(
                f"path state s={s[j]:.4g} has boundary value outside (0, 1): "
                f"u={u:.4g}, v={v:.4g}"
            )
        e0 = 0.5 * pinit[j] ** 2 + float(Ffast(np.array([winit[j]]))[0])
        states.append(
            SteadyState(
                grid=res["xs"],
                values=res["W"][:, j],
                derivs=res["P"][:, j],
                left_control=u,
                right_control=v,
                init=PhasePoint(float(winit[j]), float(pinit[j])),
                energy=e0,
                exit_x=None,
            )
        )
        controls.append((u, v))
    return SteadyPath(s_values=s, states=states, controls=controls)
