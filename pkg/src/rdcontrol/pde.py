"""Time-stepper for y_t - y_xx = f(y) on (0, L) with Dirichlet boundary data.

The scheme is IMEX: the 3-point Laplacian is advanced by a Crank-Nicolson
weighted implicit solve, the reaction is explicit, and the boundary rows are
pinned to the control values. Controls are piecewise constant per time step
(sampled at the left endpoint). The implicit matrix is a symmetric M-matrix,
so the step is order-preserving whenever the explicit part is monotone, i.e.
when dt <= dx^2 / 2 and dt * Lip(f) <= 1/2 (see monotone_dt). Larger steps
remain stable (the diffusion is implicit) but may violate the comparison
principle at the 1e-8 level.

States are clamped into [0, 1] after every step. The clamp excess before
clipping is accumulated into the trajectory diagnostics; an excess beyond
CLAMP_LIMIT in a single step is reported as a numerical failure rather than
silently absorbed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, NumericalError
from .reaction import ReactionModel, lipschitz_bound

FIELD_SLACK = 1e-10
CLAMP_LIMIT = 5e-2
REFERENCE_NX = 200

_MAGIC = b"RDTJ1"


@dataclass(frozen=True)
class Field:
    """A grid function on the uniform mesh x_j = j L / N_x, j = 0..N_x."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise DomainError("grid and values must be equal-length 1-d arrays")
        steps = np.diff(grid)
        if grid[0] != 0.0 or np.any(steps <= 0.0):
            raise DomainError("grid must increase from 0")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise DomainError("grid must be uniform")
        if values.min() < -FIELD_SLACK or values.max() > 1.0 + FIELD_SLACK:
            raise DomainError(
                f"field values in [{values.min():.3g}, {values.max():.3g}] "
                f"leave [0, 1] beyond the {FIELD_SLACK} slack"
            )

    @property
    def length(self) -> float:
        return float(self.grid[-1])

    @property
    def n_x(self) -> int:
        return self.grid.size - 1

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @classmethod
    def constant(cls, value: float, length: float, n_x: int) -> "Field":
        grid = np.linspace(0.0, length, n_x + 1)
        return cls(grid, np.full(n_x + 1, float(value)))

    @classmethod
    def from_function(cls, fn: Callable, length: float, n_x: int) -> "Field":
        """Sample fn at the grid nodes (L-infinity data is admitted)."""
        grid = np.linspace(0.0, length, n_x + 1)
        vals = np.asarray([float(fn(x)) for x in grid])
        return cls(grid, vals)

    def distance_to(self, other: Union["Field", float]) -> float:
        """Max-norm distance to another field or to a constant."""
        if isinstance(other, Field):
            if other.grid.shape != self.grid.shape:
                raise DomainError("fields live on different grids")
            return float(np.max(np.abs(self.values - other.values)))
        return float(np.max(np.abs(self.values - float(other))))


def ramp_profile(length: float, n_x: int, top: float = 0.8,
                 bottom: float = 0.1) -> Field:
    """The linear profile falling from `top` at x=0 to `bottom` at x=L."""
    grid = np.linspace(0.0, length, n_x + 1)
    return Field(grid, bottom * grid / length + top * (1.0 - grid / length))


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant boundary controls on a uniform time mesh.

    times has N_t + 1 nodes t_k = k dt; u and v hold one value per step
    (length N_t), applied on [t_k, t_{k+1}).
    """

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if times.ndim != 1 or times.size < 2:
            raise DomainError("times must hold at least two nodes")
        if u.shape != (times.size - 1,) or v.shape != (times.size - 1,):
            raise DomainError("u and v must hold one value per time step")
        steps = np.diff(times)
        if times[0] != 0.0 or np.any(steps <= 0.0):
            raise DomainError("times must increase from 0")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise DomainError("time mesh must be uniform")
        for name, arr in (("u", u), ("v", v)):
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise DomainError(f"control {name} leaves [0, 1]")

    @property
    def n_t(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @classmethod
    def constant(cls, u: float, v: float, t_final: float,
                 n_t: int) -> "ControlSchedule":
        times = np.linspace(0.0, t_final, n_t + 1)
        return cls(times, np.full(n_t, float(u)), np.full(n_t, float(v)))

    @classmethod
    def from_function(cls, fn: Callable, t_final: float,
                      n_t: int) -> "ControlSchedule":
        """Sample fn(t) -> (u, v) at the left endpoint of every step."""
        times = np.linspace(0.0, t_final, n_t + 1)
        uv = np.asarray([fn(t) for t in times[:-1]], dtype=float)
        return cls(times, uv[:, 0], uv[:, 1])

    def concat(self, other: "ControlSchedule") -> "ControlSchedule":
        """Append another schedule with the same dt after this one."""
        if abs(other.dt - self.dt) > 1e-12 * self.dt:
            raise DomainError("schedules must share dt to concatenate")
        times = np.concatenate([self.times, self.times[-1] + other.times[1:]])
        return ControlSchedule(
            times, np.concatenate([self.u, other.u]),
            np.concatenate([self.v, other.v]),
        )


@dataclass(frozen=True)
class Trajectory:
    """Recorded run of the time-stepper.

    states[i] is the field at times[i]; the first state is the initial
    condition. clamp_max is the worst single-step excess outside [0, 1]
    absorbed by clamping (scheme overshoot diagnostics).
    """

    model: ReactionModel
    times: np.ndarray
    grid: np.ndarray
    states: np.ndarray
    schedule: ControlSchedule
    clamp_max: float = 0.0

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise DomainError("snapshot times must increase strictly")

    @property
    def final(self) -> Field:
        return Field(self.grid, self.states[-1])

    def field_at(self, i: int) -> Field:
        return Field(self.grid, self.states[i])

    def snapshots(self) -> Iterator[Tuple[float, Field]]:
        for t, row in zip(self.times, self.states):
            yield float(t), Field(self.grid, row)

    def distances_to(self, target: Union[Field, float]) -> np.ndarray:
        """Per-snapshot max-norm distance to a target profile or constant."""
        tgt = target.values if isinstance(target, Field) else float(target)
        return np.max(np.abs(self.states - tgt), axis=1)


def monotone_dt(model: ReactionModel, dx: float) -> float:
    """Largest dt with a discrete comparison principle for this scheme.

    The explicit row is (1 - sigma) y_i + (sigma/2)(y_{i-1} + y_{i+1})
    + dt f(y_i) with sigma = dt/dx^2; keeping every coefficient of an
    ordered pair nonnegative needs sigma <= 1/2 and dt Lip(f) <= 1/2.
    """
    lip = lipschitz_bound(model)
    bound = 0.5 * dx * dx
    if lip > 0.0:
        bound = min(bound, 0.5 / lip)
    return bound


def reference_dt(model: ReactionModel) -> float:
    """Default accuracy-oriented step: min(1e-3, 0.9 / Lip(f))."""
    lip = lipschitz_bound(model)
    return min(1e-3, 0.9 / lip) if lip > 0.0 else 1e-3


class _Stepper:
    """Marching state for the IMEX scheme (internal hot loop)."""

    def __init__(self, model: ReactionModel, y0: np.ndarray, dx: float,
                 dt: float):
        if dt <= 0.0:
            raise DomainError("dt must be positive")
        self.f = model.f
        self.dt = dt
        self.sigma = dt / (dx * dx)
        n = y0.size
        # banded storage of I + (sigma/2) tridiag(-1, 2, -1) on the interior
        ab = np.zeros((3, n - 2))
        ab[0, 1:] = -0.5 * self.sigma
        ab[1, :] = 1.0 + self.sigma
        ab[2, :-1] = -0.5 * self.sigma
        self.ab = ab
        self.y = np.array(y0, dtype=float)
        self.clamp_max = 0.0

    def step(self, u: float, v: float) -> np.ndarray:
        y, s, dt = self.y, self.sigma, self.dt
        if not np.all(np.isfinite(y)):
            raise NumericalError("state lost finiteness")
        rhs = (
            (1.0 - s) * y[1:-1]
            + 0.5 * s * (y[:-2] + y[2:])
            + dt * self.f(y[1:-1])
        )
        rhs[0] += 0.5 * s * u
        rhs[-1] += 0.5 * s * v
        interior = solve_banded((1, 1), self.ab, rhs)
        y_new = np.empty_like(y)
        y_new[0], y_new[1:-1], y_new[-1] = u, interior, v
        excess = max(-y_new.min(), y_new.max() - 1.0, 0.0)
        if excess > CLAMP_LIMIT:
            raise NumericalError(
                f"step overshoot {excess:.3g} exceeds {CLAMP_LIMIT}; "
                "the time step is too large for this reaction"
            )
        self.clamp_max = max(self.clamp_max, excess)
        np.clip(y_new, 0.0, 1.0, out=y_new)
        self.y = y_new
        return y_new


def step(model: ReactionModel, y: Field, u_k: float, v_k: float,
         dt: float) -> Field:
    """One IMEX step from y with boundary values held at (u_k, v_k)."""
    st = _Stepper(model, y.values, y.dx, dt)
    return Field(y.grid, st.step(float(u_k), float(v_k)))


def simulate(model: ReactionModel, y0: Field, schedule: ControlSchedule,
             record_every: int = 1) -> Trajectory:
    """March y0 through the whole schedule, recording every record_every
    steps (the final state is always recorded)."""
    if record_every < 1:
        raise DomainError("record_every must be >= 1")
    dt = schedule.dt
    st = _Stepper(model, y0.values, y0.dx, dt)
    n_t = schedule.n_t
    rec_idx = [0]
    states = [st.y.copy()]
    for k in range(n_t):
        y = st.step(float(schedule.u[k]), float(schedule.v[k]))
        if (k + 1) % record_every == 0 or k == n_t - 1:
            rec_idx.append(k + 1)
            states.append(y.copy())
    return Trajectory(
        model=model,
        times=schedule.times[rec_idx],
        grid=y0.grid.copy(),
        states=np.asarray(states),
        schedule=schedule,
        clamp_max=st.clamp_max,
    )


def simulate_until(
    model: ReactionModel,
    y0: Field,
    u: float,
    v: float,
    dt: float,
    stop: Callable[[float, np.ndarray], bool],
    t_max: float,
    check_every: int = 10,
    record_every: int = 100,
) -> Tuple[Trajectory, Optional[float]]:
    """Constant-control run until stop(t, values) or t_max.

    Returns the trajectory up to the stopping step and the stop time (None
    if t_max was reached first). The stop predicate is polled every
    check_every steps.
    """
    st = _Stepper(model, y0.values, y0.dx, dt)
    n_max = int(np.ceil(t_max / dt))
    rec_idx = [0]
    states = [st.y.copy()]
    hit: Optional[float] = None
    k = 0
    for k in range(1, n_max + 1):
        y = st.step(u, v)
        if k % record_every == 0:
            rec_idx.append(k)
            states.append(y.copy())
        if k % check_every == 0 and stop(k * dt, y):
            hit = k * dt
            break
    if rec_idx[-1] != k and k > 0:
        rec_idx.append(k)
        states.append(st.y.copy())
    schedule = ControlSchedule.constant(u, v, max(k, 1) * dt, max(k, 1))
    return (
        Trajectory(
            model=model,
            times=dt * np.asarray(rec_idx, dtype=float),
            grid=y0.grid.copy(),
            states=np.asarray(states),
            schedule=schedule,
            clamp_max=st.clamp_max,
        ),
        hit,
    )


def discrete_steady_state(model: ReactionModel, y_start: Field, u: float,
                          v: float, tol: float = 1e-12,
                          max_iter: int = 40) -> Field:
    """Steady state of the DISCRETE scheme near y_start, boundaries (u, v).

    Damped-Newton solve of the interior stencil (y_{i-1} - 2 y_i + y_{i+1})
    / dx^2 + f(y_i) = 0. A continuum stationary profile sampled at the grid
    nodes misses the scheme's own fixed point by O(dx^2); this projection
    removes that gap so fixed-point assertions hold at solver precision.
    """
    dx = y_start.dx
    y = np.array(y_start.values, dtype=float)
    y[0], y[-1] = u, v
    inv_h2 = 1.0 / (dx * dx)

    def residual(z):
        return inv_h2 * (z[:-2] - 2.0 * z[1:-1] + z[2:]) + model.f(z[1:-1])

    r = residual(y)
    for _ in range(max_iter):
        norm = np.max(np.abs(r))
        if norm <= tol:
            break
        n_int = y.size - 2
        ab = np.zeros((3, n_int))
        ab[0, 1:] = inv_h2
        ab[1, :] = -2.0 * inv_h2 + model.f_prime(y[1:-1])
        ab[2, :-1] = inv_h2
        delta = solve_banded((1, 1), ab, -r)
        lam = 1.0
        while lam > 1e-6:
            y_try = y.copy()
            y_try[1:-1] += lam * delta
            r_try = residual(y_try)
            if np.max(np.abs(r_try)) < norm:
                y, r = y_try, r_try
                break
            lam *= 0.5
        else:
            raise NumericalError("steady-state projection stalled")
    else:
        raise NumericalError("steady-state projection did not converge")
    return Field(y_start.grid, np.clip(y, 0.0, 1.0))


def stationary_residual(model: ReactionModel, y: Field) -> float:
    """Max-norm residual of -y'' = f(y) on the interior 3-point stencil."""
    h = y.dx
    vals = y.values
    r = (vals[:-2] - 2.0 * vals[1:-1] + vals[2:]) / (h * h) + model.f(
        vals[1:-1]
    )
    return float(np.max(np.abs(r))) if r.size else 0.0


def detect_convergence(traj: Trajectory, window: float,
                       tol: float) -> Optional[Field]:
    """Trailing profile if the run has settled into a steady state.

    Requires constant controls over the trailing window, max-norm change of
    the recorded states over the window <= tol, and a stationary residual of
    the trailing state <= 10 tol. Returns None otherwise.
    """
    t_end = traj.times[-1]
    t_from = t_end - window
    if t_from < traj.times[0]:
        return None
    sched = traj.schedule
    live = sched.times[:-1] >= t_from - 1e-12
    if not live.any():
        return None
    if (np.ptp(sched.u[live]) > 0.0) or (np.ptp(sched.v[live]) > 0.0):
        return None
    sel = traj.times >= t_from - 1e-12
    tail = traj.states[sel]
    if np.max(np.abs(tail - tail[-1])) > tol:
        return None
    final = traj.final
    if stationary_residual(traj.model, final) > 10.0 * tol:
        return None
    return final


def lyapunov_v(y: Field) -> float:
    """V[y] = int (y - 1 - ln y) dx, the invasion Lyapunov functional.

    Nonnegative, zero exactly at y = 1; decreasing along runs with u = v = 1.
    """
    if y.values.min() <= 1e-14:
        raise DomainError("lyapunov_v needs y > 0 pointwise")
    integrand = y.values - 1.0 - np.log(y.values)
    return float(np.trapezoid(integrand, y.grid))


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of a comparison-principle monitor run."""

    max_gap: float  # max over time and space of (low - high)
    ordered: bool   # max_gap <= 1e-8
    t_worst: float


def check_comparison(model: ReactionModel, y0_low: Field, y0_high: Field,
                     schedule: ControlSchedule) -> ComparisonReport:
    """Run ordered initial data under one schedule and report the worst
    ordering violation low - high (positive = violation)."""
    if np.any(y0_low.values > y0_high.values):
        raise DomainError("y0_low must be <= y0_high pointwise")
    lo = simulate(model, y0_low, schedule)
    hi = simulate(model, y0_high, schedule)
    gaps = np.max(lo.states - hi.states, axis=1)
    i = int(np.argmax(gaps))
    return ComparisonReport(
        max_gap=float(gaps[i]),
        ordered=bool(gaps[i] <= 1e-8),
        t_worst=float(lo.times[i]),
    )


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Long-format CSV with header t,x,y, one row per (snapshot, node)."""
    with open(path, "w", newline="") as fh:
        fh.write("t,x,y\n")
        for i, t in enumerate(traj.times):
            for x, y in zip(traj.grid, traj.states[i]):
                fh.write(f"{float(t)!r},{float(x)!r},{float(y)!r}\n")


def schedule_to_csv(schedule: ControlSchedule, path) -> None:
    """CSV with header t,u,v; one row per step (left-endpoint times)."""
    with open(path, "w", newline="") as fh:
        fh.write("t,u,v\n")
        for t, u, v in zip(schedule.times[:-1], schedule.u, schedule.v):
            fh.write(f"{float(t)!r},{float(u)!r},{float(v)!r}\n")


def save_trajectory(traj: Trajectory, path) -> None:
    """Compact binary snapshot dump.

    Layout (little-endian): magic b"RDTJ1"; int64 N_x; int64 N_t (recorded
    intervals, so N_t + 1 snapshots); float64 L; float64 dt (recording
    interval); then (N_t + 1) * (N_x + 1) float64 states, row-major in time.
    Only uniformly recorded trajectories can be dumped.
    """
    dts = np.diff(traj.times)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * dts[0]:
        raise DomainError("binary dump needs uniformly recorded snapshots")
    n_t = traj.times.size - 1
    n_x = traj.grid.size - 1
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qqdd", n_x, n_t, traj.grid[-1], dts[0]))
        fh.write(np.ascontiguousarray(traj.states, dtype="<f8").tobytes())


def load_trajectory(path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a save_trajectory dump; returns (times, grid, states)."""
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != _MAGIC:
            raise DomainError(f"not a trajectory dump (magic {magic!r})")
        n_x, n_t, length, dt = struct.unpack("<qqdd", fh.read(32))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != (n_t + 1) * (n_x + 1):
        raise DomainError("trajectory dump is truncated")
    states = data.reshape(n_t + 1, n_x + 1)
    times = dt * np.arange(n_t + 1)
    grid = np.linspace(0.0, length, n_x + 1)
    return times, grid, states
