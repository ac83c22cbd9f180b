"""Command-line experiment runner: JSON configs in, CSV/JSON artifacts out.

Subcommands
-----------
thresholds   critical-length report for a reaction model
simulate     march the equation under constant boundary controls
staircase    run the staircase strategy onto the unstable state theta
optimize     terminal-cost boundary-control solve on a fixed horizon
mintime      smallest feasible horizon, located by bisection
stationary   enumerate stationary profiles for fixed boundary values

Usage::

    rdcontrol <command> [--config FILE] [--preset NAME] [--L LENGTH]
                        [--out DIR]

Configuration is a single JSON object; keys outside the command's schema
are rejected before any computation, with the config line quoted when it
can be found. ``--preset`` loads a named experiment (``cas1`` constant
theta controls at L=5, ``cas2``/``cas3`` terminal-cost solves at L=8 and
L=12, ``mintime2``/``mintime1`` minimal time at L=8 with two and with
tied controls), ``--config`` merges a file on top of it, and ``--L`` /
``--out`` override the length and the output directory last.

Schema (defaults in parentheses; the first three keys are accepted by
every command)::

  model        {"type": "logistic"} | {"type": "cubic", "theta": t}
               (cubic with theta = 1/3)
  out          output directory ("out")
  seed         integer echoed into artifacts (0)
  length       domain length L (8.0; 12.0 for stationary)
  n_x          space intervals (60)
  y0           {"kind": "ramp", "top": 0.8, "bottom": 0.1}
               | {"kind": "constant", "value": c}
               | {"kind": "values", "values": [n_x + 1 floats]}
  -- simulate   t_final (20.0), u (0.0), v (0.0), dt (model default),
                record_dt (0.1)
  -- staircase  strategy {epsilon, eta, tau, tol_final, n_steps, c_box,
                t_max, dt} ({}), override_gate (false)
  -- optimize   horizon (20.0), n_t (400), target {"kind": "theta"} |
                {"kind": "constant", "value": a}, tie_controls (false),
                max_iters (500), tol_grad (1e-8)
  -- mintime    n_t (400), tie_controls (false), t_lo (0.5), t_hi (12.0),
                time_tol (0.05), feas_tol_inf (0.02), max_iters (500)
  -- stationary u (0.0), v (0.0), n_scan (2048)

Artifacts: every run writes ``outcome.json`` (results plus the merged
config, minus the output directory so reruns into different directories
stay byte-identical); simulation-backed commands add ``trajectory.csv``
(long format ``t,x,y``), ``schedule.csv`` (``t,u,v``) and
``plot_data.csv`` with the state at times 0, T/4, T/2, 3T/4, T.
Identical config and seed give byte-identical artifacts. Non-finite
numbers are serialized as the strings "inf"/"-inf"/"nan".

Exit codes: 0 success, 2 configuration error, 3 infeasible problem or
failed strategy, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from . import phase_plane as pp
from .errors import (
    ConfigError,
    DomainError,
    FeasibilityError,
    ModelError,
    NumericalError,
)
from .optimal_control import (
    OcpSpec,
    default_feasibility_cost,
    forward,
    minimal_time,
    solve_terminal,
)
from .pde import (
    ControlSchedule,
    Field,
    Trajectory,
    monotone_dt,
    ramp_profile,
    reference_dt,
    schedule_to_csv,
    simulate,
    trajectory_to_csv,
)
from .reaction import ReactionModel, cubic, logistic
from .strategies import StaircaseConfig, StrategyOutcome, staircase_to_theta

__all__ = ["main"]


# ----------------------------------------------------------------- schema

class _SchemaError(ConfigError):
    """Config validation failure tagged with the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


def _is_num(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _c_number(lo: Optional[float] = None, hi: Optional[float] = None,
              open_lo: bool = False, open_hi: bool = False) -> Callable:
    def check(key: str, value: Any) -> float:
        if not _is_num(value):
            raise _SchemaError(key, f'"{key}" must be a number, got {value!r}')
        x = float(value)
        if lo is not None and (x < lo or (open_lo and x == lo)):
            bound = f"> {lo}" if open_lo else f">= {lo}"
            raise _SchemaError(key, f'"{key}" must be {bound}, got {x}')
        if hi is not None and (x > hi or (open_hi and x == hi)):
            bound = f"< {hi}" if open_hi else f"<= {hi}"
            raise _SchemaError(key, f'"{key}" must be {bound}, got {x}')
        return x
    return check


_c_positive = _c_number(lo=0.0, open_lo=True)
_c_nonneg = _c_number(lo=0.0)
_c_unit = _c_number(lo=0.0, hi=1.0)


def _c_int(lo: int) -> Callable:
    def check(key: str, value: Any) -> int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise _SchemaError(key, f'"{key}" must be an integer, got {value!r}')
        if value < lo:
            raise _SchemaError(key, f'"{key}" must be >= {lo}, got {value}')
        return value
    return check


def _c_bool(key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise _SchemaError(key, f'"{key}" must be true or false, got {value!r}')
    return value


def _c_str(key: str, value: Any) -> str:
    if not isinstance(value, str) or not value:
        raise _SchemaError(key, f'"{key}" must be a nonempty string')
    return value


def _c_opt(check: Callable) -> Callable:
    def wrapped(key: str, value: Any):
        return None if value is None else check(key, value)
    return wrapped


def _reject_unknown(obj: Dict[str, Any], allowed: set, what: str) -> None:
    for k in obj:
        if k not in allowed:
            raise _SchemaError(
                k, f'unknown key "{k}" in {what} '
                f'(allowed: {", ".join(sorted(allowed))})'
            )


def _c_model(key: str, value: Any) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise _SchemaError(key, '"model" must be an object with a "type" key')
    _reject_unknown(value, {"type", "theta"}, '"model"')
    kind = value.get("type")
    if kind == "logistic":
        if "theta" in value:
            raise _SchemaError("theta", "the logistic model takes no theta")
        return {"type": "logistic"}
    if kind == "cubic":
        if "theta" not in value:
            raise _SchemaError("type", "the cubic model needs a theta in (0, 1)")
        theta = value["theta"]
        if not _is_num(theta) or not 0.0 < float(theta) < 1.0:
            raise _SchemaError(
                "theta", f"theta={theta!r} must be a number in (0, 1)")
        return {"type": "cubic", "theta": float(theta)}
    raise _SchemaError("type", f'model type {kind!r} is not "logistic" or "cubic"')


def _c_y0(key: str, value: Any) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise _SchemaError(key, '"y0" must be an object with a "kind" key')
    kind = value.get("kind")
    if kind == "ramp":
        _reject_unknown(value, {"kind", "top", "bottom"}, '"y0"')
        return {
            "kind": "ramp",
            "top": _c_unit("top", value.get("top", 0.8)),
            "bottom": _c_unit("bottom", value.get("bottom", 0.1)),
        }
    if kind == "constant":
        _reject_unknown(value, {"kind", "value"}, '"y0"')
        if "value" not in value:
            raise _SchemaError("kind", 'constant y0 needs a "value"')
        return {"kind": "constant", "value": _c_unit("value", value["value"])}
    if kind == "values":
        _reject_unknown(value, {"kind", "values"}, '"y0"')
        vals = value.get("values")
        if not isinstance(vals, list) or not vals or not all(
                _is_num(v) for v in vals):
            raise _SchemaError("values", '"values" must be a list of numbers')
        return {"kind": "values", "values": [float(v) for v in vals]}
    raise _SchemaError(
        "kind", f'y0 kind {kind!r} is not "ramp", "constant" or "values"')


def _c_target(key: str, value: Any) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise _SchemaError(key, '"target" must be an object with a "kind" key')
    kind = value.get("kind")
    if kind == "theta":
        _reject_unknown(value, {"kind"}, '"target"')
        return {"kind": "theta"}
    if kind == "constant":
        _reject_unknown(value, {"kind", "value"}, '"target"')
        if "value" not in value:
            raise _SchemaError("kind", 'constant target needs a "value"')
        return {"kind": "constant", "value": _c_unit("value", value["value"])}
    raise _SchemaError(
        "kind", f'target kind {kind!r} is not "theta" or "constant"')


_STRATEGY_KEYS = {
    "epsilon", "eta", "tau", "tol_final", "n_steps", "c_box", "t_max", "dt",
}


def _c_strategy(key: str, value: Any) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise _SchemaError(key, '"strategy" must be an object')
    _reject_unknown(value, _STRATEGY_KEYS, '"strategy"')
    out: Dict[str, Any] = {}
    for k, v in value.items():
        if k == "n_steps":
            out[k] = _c_int(2)(k, v)
        elif k == "dt":
            out[k] = _c_opt(_c_positive)(k, v)
        else:
            out[k] = _c_positive(k, v)
    return out


_MODEL_DEFAULT = {"type": "cubic", "theta": 1.0 / 3.0}
_Y0_DEFAULT = {"kind": "ramp"}


def _common() -> Dict[str, Tuple[Any, Callable]]:
    return {
        "model": (_MODEL_DEFAULT, _c_model),
        "out": ("out", _c_str),
        "seed": (0, _c_int(0)),
    }


_SCHEMAS: Dict[str, Dict[str, Tuple[Any, Callable]]] = {
    "thresholds": _common(),
    "simulate": {
        **_common(),
        "length": (8.0, _c_positive),
        "n_x": (60, _c_int(2)),
        "y0": (_Y0_DEFAULT, _c_y0),
        "t_final": (20.0, _c_positive),
        "u": (0.0, _c_unit),
        "v": (0.0, _c_unit),
        "dt": (None, _c_opt(_c_positive)),
        "record_dt": (0.1, _c_positive),
    },
    "staircase": {
        **_common(),
        "length": (8.0, _c_positive),
        "n_x": (60, _c_int(2)),
        "y0": (_Y0_DEFAULT, _c_y0),
        "strategy": ({}, _c_strategy),
        "override_gate": (False, _c_bool),
    },
    "optimize": {
        **_common(),
        "length": (8.0, _c_positive),
        "n_x": (60, _c_int(16)),
        "y0": (_Y0_DEFAULT, _c_y0),
        "horizon": (20.0, _c_positive),
        "n_t": (400, _c_int(16)),
        "target": ({"kind": "theta"}, _c_target),
        "tie_controls": (False, _c_bool),
        "max_iters": (500, _c_int(1)),
        "tol_grad": (1e-8, _c_nonneg),
    },
    "mintime": {
        **_common(),
        "length": (8.0, _c_positive),
        "n_x": (60, _c_int(16)),
        "y0": (_Y0_DEFAULT, _c_y0),
        "n_t": (400, _c_int(16)),
        "tie_controls": (False, _c_bool),
        "t_lo": (0.5, _c_nonneg),
        "t_hi": (12.0, _c_positive),
        "time_tol": (0.05, _c_positive),
        "feas_tol_inf": (0.02, _c_positive),
        "max_iters": (500, _c_int(1)),
    },
    "stationary": {
        **_common(),
        "length": (12.0, _c_positive),
        "u": (0.0, _c_unit),
        "v": (0.0, _c_unit),
        "n_scan": (2048, _c_int(16)),
    },
}

_PRESETS: Dict[str, Tuple[str, Dict[str, Any]]] = {
    "cas1": ("simulate",
             {"length": 5.0, "t_final": 20.0, "u": 1.0 / 3.0, "v": 1.0 / 3.0}),
    "cas2": ("optimize", {"length": 8.0, "horizon": 20.0}),
    "cas3": ("optimize", {"length": 12.0, "horizon": 100.0}),
    "mintime2": ("mintime",
                 {"length": 8.0, "tie_controls": False, "t_hi": 12.0}),
    "mintime1": ("mintime",
                 {"length": 8.0, "tie_controls": True, "t_hi": 16.0}),
}


def _locate(err: _SchemaError, raw: Optional[str],
            path: Optional[str]) -> ConfigError:
    """Prefix the config file line holding the offending key, when found."""
    if raw is not None and path is not None:
        needle = f'"{err.key}"'
        for n, line in enumerate(raw.splitlines(), start=1):
            if needle in line:
                return ConfigError(f"{path}:{n}: {err}")
    return err


def _validate(command: str, merged: Dict[str, Any], raw: Optional[str],
              path: Optional[str]) -> Dict[str, Any]:
    schema = _SCHEMAS[command]
    for key in merged:
        if key not in schema:
            err = _SchemaError(
                key, f'unknown key "{key}" for {command} '
                f'(allowed: {", ".join(sorted(schema))})'
            )
            raise _locate(err, raw, path)
    cfg: Dict[str, Any] = {}
    for key, (default, check) in schema.items():
        value = merged.get(key, default)
        if isinstance(value, dict):
            value = dict(value)
        try:
            cfg[key] = check(key, value)
        except _SchemaError as err:
            raise _locate(err, raw, path) from None
    return cfg


def _assemble(args: argparse.Namespace) -> Dict[str, Any]:
    merged: Dict[str, Any] = {}
    if args.preset is not None:
        preset_command, overrides = _PRESETS[args.preset]
        if preset_command != args.command:
            raise ConfigError(
                f'preset "{args.preset}" belongs to the '
                f"{preset_command} command, not {args.command}"
            )
        merged.update(overrides)
    raw = path = None
    if args.config is not None:
        path = args.config
        try:
            raw = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(parsed, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        merged.update(parsed)
    if args.L is not None:
        if "length" not in _SCHEMAS[args.command]:
            raise ConfigError(f"--L is not accepted by {args.command}")
        merged["length"] = args.L
    if args.out is not None:
        merged["out"] = args.out
    return _validate(args.command, merged, raw, path)


# ---------------------------------------------------------------- helpers

def _build_model(spec: Dict[str, Any]) -> ReactionModel:
    if spec["type"] == "logistic":
        return logistic()
    return cubic(spec["theta"])


def _build_y0(spec: Dict[str, Any], length: float, n_x: int) -> Field:
    if spec["kind"] == "ramp":
        return ramp_profile(length, n_x, top=spec["top"], bottom=spec["bottom"])
    if spec["kind"] == "constant":
        return Field.constant(spec["value"], length, n_x)
    vals = np.asarray(spec["values"], dtype=float)
    if vals.size != n_x + 1:
        raise ConfigError(
            f"y0 values must hold n_x + 1 = {n_x + 1} entries, got {vals.size}")
    return Field(np.linspace(0.0, length, n_x + 1), vals)


def _sim_step(model: ReactionModel, length: float, n_x: int,
              dt: Optional[float]) -> float:
    if dt is not None:
        return float(dt)
    return min(reference_dt(model), monotone_dt(model, length / n_x))


def _json_ready(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.write_text(
        json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n")


def _snapshot_times(t_final: float) -> Sequence[float]:
    return [0.0, 0.25 * t_final, 0.5 * t_final, 0.75 * t_final, t_final]


def _write_plot_data(path: Path, traj: Trajectory,
                     targets: Sequence[float]) -> None:
    """State columns at the recorded times nearest the requested ones."""
    idx = [int(np.argmin(np.abs(traj.times - t))) for t in targets]
    cols = [traj.states[i] for i in idx]
    with open(path, "w", newline="") as fh:
        fh.write("x," + ",".join(
            f"y(t={float(traj.times[i])!r})" for i in idx) + "\n")
        for j, x in enumerate(traj.grid):
            fh.write(f"{float(x)!r}," + ",".join(
                f"{float(c[j])!r}" for c in cols) + "\n")


def _echo(cfg: Dict[str, Any]) -> Dict[str, Any]:
    """Config echoed into outcome.json; the output directory is omitted so
    reruns into different directories stay byte-identical."""
    return {k: v for k, v in cfg.items() if k != "out"}


def _fmt(x: float) -> str:
    return f"{x:.6f}" if math.isfinite(x) else repr(x)


# --------------------------------------------------------------- commands

def _cmd_thresholds(cfg: Dict[str, Any], out_dir: Path) -> int:
    model = _build_model(cfg["model"])
    star = pp.l_star_info(model)
    star_low = pp.l_star_lower_bound(model)
    report: Dict[str, Any] = {
        "command": "thresholds",
        "model": model.name,
        "l_star": {
            "value": star.value,
            "attained": star.attained,
            "argmin_alpha": star.argmin,
        },
        "l_star_lower_bound": star_low,
        "config": _echo(cfg),
    }

    def describe(info, var: str) -> str:
        if info.attained:
            return f"{_fmt(info.value)}  (attained at {var} = {info.argmin:.6g})"
        return f"{_fmt(info.value)}  (infimum, not attained)"

    lines = [
        f"model                {model.name}",
        f"l_star               {describe(star, 'alpha')}",
        f"l_star_lower_bound   {_fmt(star_low)}",
    ]
    if model.theta is not None:
        th = pp.l_theta_info(model)
        th_low = pp.l_theta_lower_bound(model)
        report["l_theta"] = {
            "value": th.value,
            "attained": th.attained,
            "argmin_beta": th.argmin,
        }
        report["l_theta_lower_bound"] = th_low
        lines += [
            f"l_theta              {describe(th, 'beta')}",
            f"l_theta_lower_bound  {_fmt(th_low)}",
        ]
    _write_json(out_dir / "thresholds.json", report)
    print("\n".join(lines))
    print(f"wrote {out_dir / 'thresholds.json'}")
    return 0


def _cmd_simulate(cfg: Dict[str, Any], out_dir: Path) -> int:
    model = _build_model(cfg["model"])
    length, n_x = cfg["length"], cfg["n_x"]
    y0 = _build_y0(cfg["y0"], length, n_x)
    t_final = cfg["t_final"]
    dt = _sim_step(model, length, n_x, cfg["dt"])
    n_steps = max(1, int(round(t_final / dt)))
    schedule = ControlSchedule.constant(cfg["u"], cfg["v"], t_final, n_steps)
    record_every = max(1, int(round(cfg["record_dt"] * n_steps / t_final)))
    traj = simulate(model, y0, schedule, record_every=record_every)
    final = traj.final
    final_stats = {
        "max": float(final.values.max()),
        "min": float(final.values.min()),
        "dist_to_zero": final.distance_to(0.0),
        "dist_to_one": final.distance_to(1.0),
    }
    if model.theta is not None:
        final_stats["dist_to_theta"] = final.distance_to(model.theta)
    outcome = {
        "command": "simulate",
        "model": model.name,
        "t_final": t_final,
        "dt": t_final / n_steps,
        "n_steps": n_steps,
        "final": final_stats,
        "clamp_excess": traj.clamp_max,
        "config": _echo(cfg),
    }
    trajectory_to_csv(traj, out_dir / "trajectory.csv")
    schedule_to_csv(schedule, out_dir / "schedule.csv")
    _write_plot_data(out_dir / "plot_data.csv", traj, _snapshot_times(t_final))
    _write_json(out_dir / "outcome.json", outcome)
    print(f"simulated {n_steps} steps to t = {t_final:g}; final state in "
          f"[{final_stats['min']:.6f}, {final_stats['max']:.6f}]")
    print(f"wrote trajectory.csv schedule.csv plot_data.csv outcome.json "
          f"in {out_dir}")
    return 0


def _write_strategy_artifacts(out_dir: Path, model: ReactionModel,
                              cfg: Dict[str, Any],
                              outcome: StrategyOutcome) -> None:
    trajectory_to_csv(outcome.trajectory, out_dir / "trajectory.csv")
    schedule_to_csv(outcome.schedule, out_dir / "schedule.csv")
    total = outcome.phase_times[-1]
    _write_plot_data(out_dir / "plot_data.csv", outcome.trajectory,
                     _snapshot_times(total))
    payload: Dict[str, Any] = {
        "command": "staircase",
        "model": model.name,
        "success": outcome.success,
        "phase_times": list(outcome.phase_times),
        "final_error": outcome.final_error,
        "threshold": {
            "value": outcome.threshold_value,
            "ok": outcome.threshold_ok,
        },
        "message": outcome.message,
        "config": _echo(cfg),
    }
    if outcome.dwell_errors is not None:
        corrected = (outcome.corrected if outcome.corrected is not None
                     else np.zeros(0, dtype=bool))
        payload["dwell"] = {
            "n_steps": int(outcome.dwell_errors.size),
            "n_corrections": int(np.count_nonzero(corrected)),
            "max_error": float(outcome.dwell_errors.max())
            if outcome.dwell_errors.size else 0.0,
            "errors": outcome.dwell_errors,
            "corrected": corrected,
        }
    _write_json(out_dir / "outcome.json", payload)


def _cmd_staircase(cfg: Dict[str, Any], out_dir: Path) -> int:
    model = _build_model(cfg["model"])
    length, n_x = cfg["length"], cfg["n_x"]
    y0 = _build_y0(cfg["y0"], length, n_x)
    strategy_cfg = StaircaseConfig(**cfg["strategy"])
    try:
        outcome = staircase_to_theta(
            model, y0, length, strategy_cfg,
            override_gate=cfg["override_gate"],
        )
    except FeasibilityError as exc:
        outcome = getattr(exc, "outcome", None)
        if outcome is None:
            _write_json(out_dir / "outcome.json", {
                "command": "staircase",
                "model": model.name,
                "success": False,
                "error": str(exc),
                "config": _echo(cfg),
            })
            print(f"staircase infeasible: {exc}", file=sys.stderr)
            return 3
        print(f"staircase failed: {exc}", file=sys.stderr)
    _write_strategy_artifacts(out_dir, model, cfg, outcome)
    t0, t1, total = outcome.phase_times
    status = "reached theta" if outcome.success else "failed"
    print(f"staircase {status}: final error {outcome.final_error:.3e} at "
          f"t = {total:.3f} (settle {t0:.3f}, steer {t1 - t0:.3f})")
    print(f"wrote trajectory.csv schedule.csv plot_data.csv outcome.json "
          f"in {out_dir}")
    return 0 if outcome.success else 3


def _cmd_optimize(cfg: Dict[str, Any], out_dir: Path) -> int:
    model = _build_model(cfg["model"])
    length, n_x = cfg["length"], cfg["n_x"]
    y0 = _build_y0(cfg["y0"], length, n_x)
    target = cfg["target"]
    if target["kind"] == "theta":
        if model.theta is None:
            raise ConfigError(
                'target {"kind": "theta"} needs a bistable model')
        y_target = None
    else:
        y_target = Field.constant(target["value"], length, n_x)
    spec = OcpSpec(
        model=model, length=length, horizon=cfg["horizon"], y0=y0,
        y_target=y_target, n_x=n_x, n_t=cfg["n_t"],
        tie_controls=cfg["tie_controls"],
    )
    result = solve_terminal(
        spec, max_iters=cfg["max_iters"], tol_grad=cfg["tol_grad"])
    traj, _ = forward(spec, result.schedule)
    terminal_error = traj.final.distance_to(spec.target())
    outcome = {
        "command": "optimize",
        "model": model.name,
        "horizon": cfg["horizon"],
        "final_cost": result.final_cost,
        "terminal_error": terminal_error,
        "iterations": result.iterations,
        "converged": result.converged,
        "grad_norm_final": result.grad_norm_final,
        "cost_history": result.cost_history,
        "config": _echo(cfg),
    }
    trajectory_to_csv(traj, out_dir / "trajectory.csv")
    schedule_to_csv(result.schedule, out_dir / "schedule.csv")
    _write_plot_data(out_dir / "plot_data.csv", traj,
                     _snapshot_times(cfg["horizon"]))
    _write_json(out_dir / "outcome.json", outcome)
    print(f"optimized {result.iterations} iterations: cost "
          f"{result.final_cost:.6e}, terminal error {terminal_error:.3e}")
    print(f"wrote trajectory.csv schedule.csv plot_data.csv outcome.json "
          f"in {out_dir}")
    return 0


def _cmd_mintime(cfg: Dict[str, Any], out_dir: Path) -> int:
    model = _build_model(cfg["model"])
    length, n_x = cfg["length"], cfg["n_x"]
    y0 = _build_y0(cfg["y0"], length, n_x)
    if model.theta is None:
        raise ConfigError("mintime steers to theta: needs a bistable model")
    spec = OcpSpec(
        model=model, length=length, horizon=cfg["t_hi"], y0=y0,
        n_x=n_x, n_t=cfg["n_t"], tie_controls=cfg["tie_controls"],
    )
    feas_tol = default_feasibility_cost(spec, tol_inf=cfg["feas_tol_inf"])
    t_f, result = minimal_time(
        spec, cfg["t_lo"], cfg["t_hi"], feas_tol=feas_tol,
        time_tol=cfg["time_tol"], max_iters=cfg["max_iters"],
    )
    final_spec = replace(spec, horizon=t_f)
    traj, _ = forward(final_spec, result.schedule)
    terminal_error = traj.final.distance_to(final_spec.target())
    outcome = {
        "command": "mintime",
        "model": model.name,
        "t_f": t_f,
        "feas_tol": feas_tol,
        "feas_tol_inf": cfg["feas_tol_inf"],
        "final_cost": result.final_cost,
        "terminal_error": terminal_error,
        "iterations": result.iterations,
        "config": _echo(cfg),
    }
    trajectory_to_csv(traj, out_dir / "trajectory.csv")
    schedule_to_csv(result.schedule, out_dir / "schedule.csv")
    _write_plot_data(out_dir / "plot_data.csv", traj, _snapshot_times(t_f))
    _write_json(out_dir / "outcome.json", outcome)
    print(f"minimal feasible horizon t_f = {t_f:.4f} "
          f"(cost {result.final_cost:.3e} <= {feas_tol:.3e})")
    print(f"wrote trajectory.csv schedule.csv plot_data.csv outcome.json "
          f"in {out_dir}")
    return 0


def _cmd_stationary(cfg: Dict[str, Any], out_dir: Path) -> int:
    model = _build_model(cfg["model"])
    states = pp.find_stationary_solutions(
        model, cfg["u"], cfg["v"], cfg["length"], n_scan=cfg["n_scan"])
    summary = []
    for k, state in enumerate(states):
        summary.append({
            "index": k,
            "left_control": state.left_control,
            "right_control": state.right_control,
            "launch_value": state.init.w,
            "launch_slope": state.init.p,
            "energy": state.energy,
            "max": float(state.values.max()),
            "min": float(state.values.min()),
            "admissible": state.admissible,
        })
    payload = {
        "command": "stationary",
        "model": model.name,
        "count": len(states),
        "states": summary,
        "config": _echo(cfg),
    }
    _write_json(out_dir / "stationary.json", payload)
    with open(out_dir / "stationary_profiles.csv", "w", newline="") as fh:
        fh.write("k,x,w,dw\n")
        for k, state in enumerate(states):
            for x, w, dw in zip(state.grid, state.values, state.derivs):
                fh.write(f"{k},{float(x)!r},{float(w)!r},{float(dw)!r}\n")
    print(f"found {len(states)} stationary profile(s) with "
          f"w(0) = {cfg['u']:g}, w(L) = {cfg['v']:g}, L = {cfg['length']:g}")
    print(f"wrote stationary.json stationary_profiles.csv in {out_dir}")
    return 0


_HANDLERS: Dict[str, Callable[[Dict[str, Any], Path], int]] = {
    "thresholds": _cmd_thresholds,
    "simulate": _cmd_simulate,
    "staircase": _cmd_staircase,
    "optimize": _cmd_optimize,
    "mintime": _cmd_mintime,
    "stationary": _cmd_stationary,
}

_HELP = {
    "thresholds": "critical-length report (l_star, l_theta, lower bounds)",
    "simulate": "march the equation under constant boundary controls",
    "staircase": "staircase strategy onto the unstable state theta",
    "optimize": "terminal-cost boundary-control solve on a fixed horizon",
    "mintime": "smallest feasible horizon, located by bisection",
    "stationary": "enumerate stationary profiles for fixed boundary values",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdcontrol",
        description="Boundary control experiments for 1-d reaction-diffusion "
                    "equations. Experiments are configured by a JSON file; "
                    "see the rdcontrol.cli module docstring for the schema.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler_help in _HELP.items():
        sp = sub.add_parser(name, help=handler_help)
        sp.add_argument("--config", metavar="FILE",
                        help="JSON experiment config")
        sp.add_argument("--preset", choices=sorted(_PRESETS),
                        help="named experiment to start from")
        sp.add_argument("--L", type=float, metavar="LENGTH",
                        help="override the domain length")
        sp.add_argument("--out", metavar="DIR",
                        help="output directory (default: out)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else 2
    try:
        cfg = _assemble(args)
        out_dir = Path(cfg["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        return _HANDLERS[args.command](cfg, out_dir)
    except (ConfigError, ModelError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
