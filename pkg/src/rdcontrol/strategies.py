"""Boundary-control strategies for steering reaction-diffusion states.

Four drivers built on the pde/phase_plane/optimal_control layers:

* ``static_strategy``   -- hold constant controls u = v = a and report
  whether the state settles onto a (works iff the domain length is below
  the matching stability threshold).
* ``local_steer``       -- short-horizon correction onto a nearby steady
  state, a terminal-cost optimization surrogate for local boundary
  controllability, with controls box-constrained near the target's own
  boundary values.
* ``staircase_to_theta`` -- three-phase strategy that reaches the unstable
  equilibrium theta: (1) run with u = v = epsilon until the state settles
  near the unique small epsilon-boundary steady state, (2) steer locally
  onto it, (3) walk the continuum of steady states connecting it to theta,
  dwelling on each and correcting whenever tracking drifts.
* probes -- ``uniform_time_probe`` (capture time is uniform over initial
  data, by the comparison sandwich between the extremal runs) and
  ``minimal_time_lower_bound_check`` (free-decay certified lower bound on
  any steering time).

All synthesized schedules live on one uniform execution time step, so the
per-phase pieces concatenate into a single ControlSchedule with controls
in [0, 1] exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, FeasibilityError, ModelError, NumericalError
from .optimal_control import OcpSpec, solve_terminal
from .pde import (
    ControlSchedule,
    Field,
    Trajectory,
    detect_convergence,
    discrete_steady_state,
    monotone_dt,
    reference_dt,
    simulate,
    simulate_until,
)
from .phase_plane import (
    SteadyState,
    build_path_to_theta,
    find_stationary_solutions,
    l_star,
    l_theta,
)
from .reaction import ModelKind, ReactionModel

# Phase-1 settling detection: chunk length, trailing window and tolerance.
_CHUNK = 20.0
_WINDOW = 10.0
_DETECT_TOL = 1e-5
# Max disagreement allowed between the simulated attractor and the
# shooting solver's steady state (two independent routes, same object).
_XVAL_TOL = 1e-4
# Snapshot spacing of recorded trajectories, in time units.
_RECORD_DT = 0.1

# Settled epsilon-boundary states, keyed (model.name, L, epsilon, n_x).
_YINIT_CACHE: Dict[Tuple[str, float, float, int], Tuple[np.ndarray, SteadyState]] = {}


@dataclass(frozen=True)
class StaircaseConfig:
    """Tuning knobs of the staircase strategy.

    epsilon   boundary value held during the settling phase, in (0, theta)
    eta       capture radius of local steering corrections
    tau       dwell time per path step
    tol_final success criterion: final max-norm distance to theta
    n_steps   initial resolution of the steady-state path (refined on top)
    c_box     control box half-width factor: controls stay within
              c_box * budget of the target state's boundary values
    t_max     time budget for the settling phase before timing out
    dt        execution time step (default: reference step of the model,
              capped by the monotone step of the grid)
    """

    epsilon: float = 0.02
    eta: float = 0.01
    tau: float = 1.0
    tol_final: float = 1e-2
    n_steps: int = 64
    c_box: float = 5.0
    t_max: float = 400.0
    dt: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon={self.epsilon} outside (0, 1)")
        if self.eta <= 0.0:
            raise ConfigError("eta must be positive")
        if self.tau <= 0.0:
            raise ConfigError("tau must be positive")
        if self.tol_final <= 0.0:
            raise ConfigError("tol_final must be positive")
        if self.n_steps < 2:
            raise ConfigError("n_steps must be at least 2")
        if self.c_box <= 0.0:
            raise ConfigError("c_box must be positive")
        if self.t_max <= 0.0:
            raise ConfigError("t_max must be positive")
        if self.dt is not None and self.dt <= 0.0:
            raise ConfigError("dt must be positive")


@dataclass(frozen=True, eq=False)
class StrategyOutcome:
    """Result of a strategy run.

    phase_times is (t0, t0 + t_loc, T): end of the settling phase, end of
    the local-steering phase, and total time (degenerate phases collapse,
    so the triple is nondecreasing). dwell_errors/corrected record, per
    path step of the staircase, the tracking error at the end of the dwell
    and whether a correction was applied after it.
    """

    success: bool
    schedule: ControlSchedule
    phase_times: Tuple[float, float, float]
    final_error: float
    final_state: Field
    trajectory: Trajectory
    threshold_value: float = math.nan
    threshold_ok: Optional[bool] = None
    dwell_errors: Optional[np.ndarray] = None
    corrected: Optional[np.ndarray] = None
    message: str = ""

    def __post_init__(self):
        t0, t1, t2 = self.phase_times
        if not (t0 <= t1 + 1e-12 and t1 <= t2 + 1e-12):
            raise ConfigError(f"phase times {self.phase_times} must be nondecreasing")


class _Timeline:
    """Accumulates executed steps and snapshots across strategy phases.

    All runs share one uniform dt, so the per-phase schedules concatenate
    into a single ControlSchedule; snapshots are recorded roughly every
    _RECORD_DT time units plus at every phase end.
    """

    def __init__(self, model: ReactionModel, y0: Field, dt: float):
        self.model = model
        self.dt = float(dt)
        self.grid = y0.grid.copy()
        self.y = Field(self.grid, y0.values.copy())
        self.record_every = max(1, round(_RECORD_DT / self.dt))
        self._u: List[np.ndarray] = []
        self._v: List[np.ndarray] = []
        self._times: List[np.ndarray] = [np.array([0.0])]
        self._states: List[np.ndarray] = [y0.values.copy()[None, :]]
        self.n_steps = 0
        self.clamp_max = 0.0

    @property
    def t(self) -> float:
        return self.n_steps * self.dt

    def run(self, schedule: ControlSchedule) -> Trajectory:
        traj = simulate(self.model, self.y, schedule, record_every=self.record_every)
        offset = self.t
        self._u.append(np.asarray(schedule.u, dtype=float))
        self._v.append(np.asarray(schedule.v, dtype=float))
        self._times.append(offset + traj.times[1:])
        self._states.append(traj.states[1:])
        self.n_steps += schedule.n_t
        self.clamp_max = max(self.clamp_max, traj.clamp_max)
        self.y = traj.final
        return traj

    def run_constant(self, u: float, v: float, duration: float) -> Trajectory:
        n = max(1, round(duration / self.dt))
        return self.run(ControlSchedule.constant(u, v, n * self.dt, n))

    def truncate_to(self, t_cut: float) -> None:
        """Drop everything after t_cut (must be a recorded snapshot time)."""
        k_cut = round(t_cut / self.dt)
        u = np.concatenate(self._u)[:k_cut]
        v = np.concatenate(self._v)[:k_cut]
        times = np.concatenate(self._times)
        states = np.vstack(self._states)
        keep = times <= t_cut + 1e-9
        self._u, self._v = [u], [v]
        self._times = [times[keep]]
        self._states = [states[keep]]
        self.n_steps = k_cut
        self.y = Field(self.grid, states[keep][-1].copy())

    def build(self) -> Trajectory:
        if self.n_steps == 0:
            raise NumericalError("timeline holds no executed steps")
        u = np.concatenate(self._u)
        v = np.concatenate(self._v)
        schedule = ControlSchedule(self.dt * np.arange(u.size + 1), u, v)
        return Trajectory(
            model=self.model,
            times=np.concatenate(self._times),
            grid=self.grid.copy(),
            states=np.vstack(self._states),
            schedule=schedule,
            clamp_max=self.clamp_max,
        )


def _require_bistable(model: ReactionModel, what: str) -> float:
    if model.kind is not ModelKind.BISTABLE or model.theta is None:
        raise ModelError(f"{what} requires a bistable model")
    return float(model.theta)


def _default_dt(model: ReactionModel, dx: float) -> float:
    return min(reference_dt(model), monotone_dt(model, dx))


def _check_field_length(y0: Field, length: float) -> None:
    if abs(y0.length - length) > 1e-9 * max(1.0, length):
        raise ConfigError(
            f"initial field covers (0, {y0.length}) but L={length} was given"
        )


_THRESHOLD_CACHE: Dict[Tuple[str, str], float] = {}


def _threshold_for(model: ReactionModel, target: str) -> float:
    """Critical length relevant to a static target: l_star for 0, l_theta
    for theta, +inf for 1 (invasion always wins eventually)."""
    if target == "one":
        return math.inf
    key = (model.name, target)
    if key not in _THRESHOLD_CACHE:
        if target == "zero":
            _THRESHOLD_CACHE[key] = l_star(model)
        else:
            _THRESHOLD_CACHE[key] = l_theta(model)
    return _THRESHOLD_CACHE[key]


def static_strategy(
    model: ReactionModel,
    y0: Field,
    a: float,
    length: float,
    horizon: float,
    tol_final: float = 1e-2,
    dt: Optional[float] = None,
) -> StrategyOutcome:
    """Hold u = v = a on (0, horizon) and test convergence onto a.

    The target a must be 0, 1, or theta (bistable only). The outcome also
    records the critical length for that target (threshold_value) and
    whether the domain sits below it (threshold_ok), so callers can check
    observed success against the predicted dichotomy.
    """
    _check_field_length(y0, length)
    if horizon <= 0.0:
        raise ConfigError("horizon must be positive")
    if tol_final <= 0.0:
        raise ConfigError("tol_final must be positive")
    if a == 0.0:
        target = "zero"
    elif a == 1.0:
        target = "one"
    else:
        theta = _require_bistable(model, "static strategy toward theta")
        if abs(a - theta) > 1e-12:
            raise ConfigError(f"static target a={a} must be 0, 1, or theta")
        target = "theta"
    dt = dt if dt is not None else _default_dt(model, y0.dx)
    n = max(1, round(horizon / dt))
    schedule = ControlSchedule.constant(a, a, n * dt, n)
    timeline = _Timeline(model, y0, dt)
    timeline.run(schedule)
    traj = timeline.build()
    final_error = float(np.max(np.abs(timeline.y.values - a)))
    threshold = _threshold_for(model, target)
    return StrategyOutcome(
        success=final_error <= tol_final,
        schedule=traj.schedule,
        phase_times=(0.0, 0.0, traj.schedule.t_final),
        final_error=final_error,
        final_state=timeline.y,
        trajectory=traj,
        threshold_value=threshold,
        threshold_ok=length < threshold,
    )


def _render_target(
    model: ReactionModel, target: SteadyState, grid: np.ndarray
) -> Tuple[Field, float, float]:
    """Target profile on the working grid, projected onto the discrete
    scheme's own fixed point so residual/holding assertions are exact."""
    vals = np.clip(np.interp(grid, target.grid, target.values), 0.0, 1.0)
    ub = float(target.left_control)
    vb = float(target.right_control)
    vals[0], vals[-1] = ub, vb
    seed = Field(grid, vals)
    try:
        w = discrete_steady_state(model, seed, ub, vb)
    except NumericalError:
        w = seed
    return w, ub, vb


def local_steer(
    model: ReactionModel,
    y_now: Field,
    target: SteadyState,
    horizon: float,
    budget: float,
    c_box: float = 5.0,
    dt: Optional[float] = None,
    n_t_coarse: int = 50,
    max_iters: int = 60,
    stop_frac: float = 0.25,
) -> Tuple[ControlSchedule, float]:
    """Correct y_now onto a nearby steady state over a short horizon.

    Requires ``max |y_now - target| <= budget`` (capture radius). Solves a
    terminal-cost problem on a coarsened time mesh with both controls box-
    constrained to within c_box * budget of the target's boundary values,
    then expands the plan onto the execution step dt and simulates it. The
    achieved error is measured on that executed run, never on the plan.

    Returns (schedule at step dt, achieved max-norm error). The optimizer
    stops early once the predicted error falls below stop_frac * budget.
    """
    if horizon <= 0.0:
        raise ConfigError("horizon must be positive")
    if budget <= 0.0:
        raise ConfigError("budget must be positive")
    dt = dt if dt is not None else _default_dt(model, y_now.dx)
    w, ub, vb = _render_target(model, target, y_now.grid)
    dist0 = float(np.max(np.abs(y_now.values - w.values)))
    if dist0 > budget + 1e-12:
        raise FeasibilityError(
            f"state is {dist0:.3g} from the target, outside the capture "
            f"radius {budget:.3g}"
        )
    box_u = (max(0.0, ub - c_box * budget), min(1.0, ub + c_box * budget))
    box_v = (max(0.0, vb - c_box * budget), min(1.0, vb + c_box * budget))
    n_fine_req = max(1, round(horizon / dt))
    m = max(1, round(n_fine_req / n_t_coarse))
    n_t = max(16, int(math.ceil(n_fine_req / m)))
    n_fine = n_t * m
    horizon_exec = n_fine * dt
    spec = OcpSpec(
        model=model,
        length=y_now.length,
        horizon=horizon_exec,
        y0=y_now,
        y_target=w,
        n_x=y_now.n_x,
        n_t=n_t,
    )
    init = ControlSchedule.constant(
        min(max(ub, box_u[0]), box_u[1]),
        min(max(vb, box_v[0]), box_v[1]),
        horizon_exec,
        n_t,
    )
    stop_cost = 0.5 * y_now.dx * (stop_frac * budget) ** 2
    result = solve_terminal(
        spec,
        init,
        max_iters=max_iters,
        tol_grad=1e-14,
        stop_cost=stop_cost,
        u_bounds=box_u,
        v_bounds=box_v,
    )
    fine = ControlSchedule(
        dt * np.arange(n_fine + 1),
        np.repeat(result.schedule.u, m),
        np.repeat(result.schedule.v, m),
    )
    executed = simulate(model, y_now, fine, record_every=n_fine)
    achieved = float(np.max(np.abs(executed.final.values - w.values)))
    return fine, achieved


def _settled_state(
    model: ReactionModel,
    length: float,
    epsilon: float,
    grid: np.ndarray,
    detected: Field,
) -> Tuple[Field, SteadyState]:
    """Polish a settled profile and cross-validate it against the shooting
    solver's steady states (two independent routes to the same object)."""
    polished = discrete_steady_state(model, detected, epsilon, epsilon)
    candidates = find_stationary_solutions(model, epsilon, epsilon, length)
    best: Optional[SteadyState] = None
    best_dist = math.inf
    for cand in candidates:
        rendered, _, _ = _render_target(model, cand, grid)
        dist = float(np.max(np.abs(rendered.values - polished.values)))
        if dist < best_dist:
            best, best_dist = cand, dist
    if best is None or best_dist > _XVAL_TOL:
        raise NumericalError(
            f"settled profile disagrees with the shooting solver by "
            f"{best_dist:.3g} (tolerance {_XVAL_TOL}); simulation and "
            f"stationary analysis are inconsistent"
        )
    return polished, best


def _ensure_y_init(
    model: ReactionModel,
    length: float,
    epsilon: float,
    grid: np.ndarray,
    dt: float,
    t_max: float,
) -> Tuple[Field, SteadyState]:
    """Settled epsilon-boundary state, computed once per (model, L, eps,
    grid) by a long run from the constant-1 profile and cached."""
    key = (model.name, float(length), float(epsilon), grid.size - 1)
    if key in _YINIT_CACHE:
        values, steady = _YINIT_CACHE[key]
        return Field(grid, values.copy()), steady
    y = Field(grid, np.ones(grid.size))
    elapsed = 0.0
    detected: Optional[Field] = None
    while elapsed < t_max - 1e-9:
        span = min(_CHUNK, t_max - elapsed)
        n = max(1, round(span / dt))
        sched = ControlSchedule.constant(epsilon, epsilon, n * dt, n)
        traj = simulate(model, y, sched, record_every=max(1, round(_RECORD_DT / dt)))
        y = traj.final
        elapsed += n * dt
        detected = detect_convergence(traj, window=_WINDOW, tol=_DETECT_TOL)
        if detected is not None:
            break
    if detected is None:
        raise NumericalError(
            f"epsilon-boundary run did not settle within t_max={t_max}"
        )
    polished, steady = _settled_state(model, length, epsilon, grid, detected)
    _YINIT_CACHE[key] = (polished.values.copy(), steady)
    return polished, steady


def staircase_to_theta(
    model: ReactionModel,
    y0: Field,
    length: float,
    cfg: Optional[StaircaseConfig] = None,
    override_gate: bool = False,
) -> StrategyOutcome:
    """Steer y0 onto the unstable equilibrium theta in three phases.

    Phase 1 holds u = v = epsilon until the state comes within eta of the
    settled epsilon-boundary steady state (long-run attractor, polished and
    cross-validated against the shooting solver). Phase 2 steers locally
    onto it. Phase 3 builds the continuum of steady states connecting it to
    the constant theta, dwells tau on each and applies a local correction
    whenever the end-of-dwell drift exceeds eta/2. Success means the final
    state is within tol_final of theta.

    The domain must satisfy L < l_star (gate; pass override_gate=True to
    attempt anyway, e.g. to demonstrate failure above the threshold). If
    the steady-state path cannot be built or tracking is lost, the raised
    FeasibilityError carries the partial result in its ``outcome``
    attribute (exceeding the phase-1 time budget raises NumericalError).
    """
    cfg = cfg if cfg is not None else StaircaseConfig()
    theta = _require_bistable(model, "staircase strategy")
    if cfg.epsilon >= theta:
        raise ConfigError(f"epsilon={cfg.epsilon} must sit below theta={theta}")
    _check_field_length(y0, length)
    if y0.n_x < 16:
        raise ConfigError("initial field needs at least 16 intervals")
    gate = l_star(model)
    if length >= gate and not override_gate:
        raise FeasibilityError(
            f"L={length} is not below the extinction threshold "
            f"{gate:.6f}; the staircase cannot reach theta"
        )
    dt = cfg.dt if cfg.dt is not None else _default_dt(model, y0.dx)
    timeline = _Timeline(model, y0, dt)
    use_cache = length < gate
    key = (model.name, float(length), float(cfg.epsilon), y0.n_x)

    # Phase 1: settle near the epsilon-boundary steady state.
    y_init: Optional[Field] = None
    steady: Optional[SteadyState] = None
    if use_cache and key in _YINIT_CACHE:
        values, steady = _YINIT_CACHE[key]
        y_init = Field(timeline.grid, values.copy())
    t0 = None
    while timeline.t < cfg.t_max - 1e-9:
        span = min(_CHUNK, cfg.t_max - timeline.t)
        traj = timeline.run_constant(cfg.epsilon, cfg.epsilon, span)
        if y_init is not None:
            dists = traj.distances_to(y_init)
            hits = np.nonzero(dists <= cfg.eta)[0]
            if hits.size:
                t0 = timeline.t - traj.times[-1] + float(traj.times[hits[0]])
                break
        else:
            detected = detect_convergence(traj, window=_WINDOW, tol=_DETECT_TOL)
            if detected is not None:
                y_init, steady = _settled_state(
                    model, length, cfg.epsilon, timeline.grid, detected
                )
                if use_cache:
                    _YINIT_CACHE[key] = (y_init.values.copy(), steady)
                break
    if y_init is None or steady is None:
        raise NumericalError(
            f"phase 1 did not settle within t_max={cfg.t_max}"
        )
    if t0 is None:
        full = timeline.build()
        dists = full.distances_to(y_init)
        hits = np.nonzero(dists <= cfg.eta)[0]
        if hits.size == 0:
            raise NumericalError(
                f"settled run never came within eta={cfg.eta} of the "
                "steady state it converged to"
            )
        t0 = float(full.times[hits[0]])
    timeline.truncate_to(t0)
    t1: Optional[float] = None

    def _partial(msg: str) -> StrategyOutcome:
        traj = timeline.build()
        return StrategyOutcome(
            success=False,
            schedule=traj.schedule,
            phase_times=(
                min(t0, traj.schedule.t_final),
                min(t1 if t1 is not None else t0, traj.schedule.t_final),
                traj.schedule.t_final,
            ),
            final_error=float(np.max(np.abs(timeline.y.values - theta))),
            final_state=timeline.y,
            trajectory=traj,
            threshold_value=gate,
            threshold_ok=length < gate,
            message=msg,
        )

    # Phase 2: local steering onto the settled state.
    sched2, _ = local_steer(
        model,
        timeline.y,
        steady,
        horizon=1.0,
        budget=cfg.eta,
        c_box=cfg.c_box,
        dt=dt,
    )
    timeline.run(sched2)
    t1 = timeline.t

    # Phase 3: follow the steady-state path to theta.
    try:
        path = build_path_to_theta(
            model,
            steady,
            length,
            n_steps=cfg.n_steps,
            eps_path=2.0 * cfg.eta,
        )
    except FeasibilityError as err:
        wrapped = FeasibilityError(
            f"no admissible steady-state path to theta at L={length}: {err}"
        )
        wrapped.outcome = _partial(str(wrapped))
        raise wrapped from err
    dwell_errors = np.zeros(len(path.states))
    corrected = np.zeros(len(path.states), dtype=bool)
    for k, (state, (u_s, v_s)) in enumerate(zip(path.states, path.controls)):
        w, _, _ = _render_target(model, state, timeline.grid)
        timeline.run_constant(u_s, v_s, cfg.tau)
        drift = float(np.max(np.abs(timeline.y.values - w.values)))
        dwell_errors[k] = drift
        if drift > cfg.eta / 2.0:
            corrected[k] = True
            budget = max(2.0 * cfg.eta, 1.5 * drift)
            try:
                sched_c, _ = local_steer(
                    model,
                    timeline.y,
                    state,
                    horizon=cfg.tau,
                    budget=budget,
                    c_box=cfg.c_box,
                    dt=dt,
                )
            except FeasibilityError as err:
                wrapped = FeasibilityError(
                    f"tracking lost at path step {k}/{len(path.states)}: {err}"
                )
                wrapped.outcome = _partial(str(wrapped))
                raise wrapped from err
            timeline.run(sched_c)

    traj = timeline.build()
    final_error = float(np.max(np.abs(timeline.y.values - theta)))
    return StrategyOutcome(
        success=final_error <= cfg.tol_final,
        schedule=traj.schedule,
        phase_times=(t0, t1, traj.schedule.t_final),
        final_error=final_error,
        final_state=timeline.y,
        trajectory=traj,
        threshold_value=gate,
        threshold_ok=length < gate,
        dwell_errors=dwell_errors,
        corrected=corrected,
    )


def uniform_time_probe(
    model: ReactionModel,
    length: float,
    cfg: Optional[StaircaseConfig] = None,
    n_x: int = 60,
    n_probes: int = 10,
    seed: int = 0,
    t_max: Optional[float] = None,
) -> Tuple[float, np.ndarray]:
    """Capture time of the settling phase is uniform over initial data.

    Runs u = v = epsilon from the extremal profiles 0 and 1; t_star is the
    larger of their times to come within eta of the settled state. Because
    the scheme preserves ordering (dt is kept below the monotone limit),
    every other initial profile is sandwiched between the extremal runs,
    so its capture time is at most t_star; this is spot-checked on
    n_probes random profiles. Returns (t_star, observed capture times).
    """
    cfg = cfg if cfg is not None else StaircaseConfig()
    _require_bistable(model, "uniform capture probe")
    gate = l_star(model)
    if length >= gate:
        raise FeasibilityError(
            f"L={length} is not below the extinction threshold {gate:.6f}"
        )
    if n_x < 16:
        raise ConfigError("n_x must be at least 16")
    grid = np.linspace(0.0, length, n_x + 1)
    dx = length / n_x
    dt = cfg.dt if cfg.dt is not None else _default_dt(model, dx)
    if dt > monotone_dt(model, dx) + 1e-15:
        raise ConfigError(
            "dt must respect the monotone step bound for the comparison "
            "sandwich to apply"
        )
    horizon = t_max if t_max is not None else cfg.t_max
    y_init, _ = _ensure_y_init(model, length, cfg.epsilon, grid, dt, horizon)

    def capture(y_start: Field) -> float:
        return _capture_time(
            model, y_start, y_init, cfg.epsilon, cfg.eta, dt, horizon
        )

    t_low = capture(Field(grid, np.zeros(grid.size)))
    t_high = capture(Field(grid, np.ones(grid.size)))
    t_star = max(t_low, t_high)
    rng = np.random.default_rng(seed)
    times = np.array(
        [capture(Field(grid, rng.uniform(0.0, 1.0, grid.size))) for _ in range(n_probes)]
    )
    return t_star, times


def _capture_time(
    model: ReactionModel,
    y_start: Field,
    y_init: Field,
    epsilon: float,
    eta: float,
    dt: float,
    t_max: float,
) -> float:
    """First time the u = v = epsilon run from y_start comes within eta of
    y_init (0 when it already starts there)."""
    if float(np.max(np.abs(y_start.values - y_init.values))) <= eta:
        return 0.0
    _, hit = simulate_until(
        model,
        y_start,
        epsilon,
        epsilon,
        dt,
        stop=lambda t, vals: float(np.max(np.abs(vals - y_init.values))) <= eta,
        t_max=t_max,
    )
    if hit is None:
        raise NumericalError(
            f"settling run did not reach the steady state within {t_max}"
        )
    return float(hit)


def minimal_time_lower_bound_check(
    model: ReactionModel,
    y0: Field,
    length: float,
    slack: float = 0.0,
    dt: Optional[float] = None,
    t_max: float = 200.0,
) -> float:
    """Certified lower bound on the time any strategy needs to reach theta.

    Any admissible controls sit between the extremal choices u = v = 0 and
    u = v = 1, so the controlled state is sandwiched between the two free
    runs. Where y0 exceeds theta + slack, no strategy can be uniformly
    below theta + slack before the u = v = 0 run is; symmetrically from
    below with u = v = 1. Returns the larger applicable first-crossing
    time (0 when a side does not apply, inf when it does not resolve
    within t_max).
    """
    theta = _require_bistable(model, "minimal-time lower bound")
    _check_field_length(y0, length)
    if slack < 0.0:
        raise ConfigError("slack must be nonnegative")
    dt = dt if dt is not None else _default_dt(model, y0.dx)
    t_bound = 0.0
    if float(np.max(y0.values)) > theta + slack:
        _, hit = simulate_until(
            model,
            y0,
            0.0,
            0.0,
            dt,
            stop=lambda t, vals: float(np.max(vals)) <= theta + slack,
            t_max=t_max,
        )
        t_bound = max(t_bound, math.inf if hit is None else float(hit))
    if float(np.min(y0.values)) < theta - slack:
        _, hit = simulate_until(
            model,
            y0,
            1.0,
            1.0,
            dt,
            stop=lambda t, vals: float(np.min(vals)) >= theta - slack,
            t_max=t_max,
        )
        t_bound = max(t_bound, math.inf if hit is None else float(hit))
    return t_bound
