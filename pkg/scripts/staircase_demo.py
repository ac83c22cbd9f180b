#!/usr/bin/env python3
"""Drive the staircase strategy through the CLI and summarize the outcome.

Runs ``rdcontrol staircase`` for a chosen domain length (default L=8,
squarely inside the controllable window for the default bistable model),
then reads the written ``outcome.json`` back and prints a compact report:
phase boundaries, dwell-correction statistics, and the final distance to
the unstable level.

Lengths at or beyond the controllability threshold are refused by the
strategy's feasibility gate (exit code 3); pass ``--force`` to run anyway
and inspect how the attempt fails (the partial artifacts are still
written).
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from rdcontrol import cli


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--L", type=float, default=8.0,
                        help="domain length (default: %(default)s)")
    parser.add_argument("--n-steps", type=int, default=None, metavar="N",
                        help="number of steady states along the path")
    parser.add_argument("--out", default="staircase_run", metavar="DIR",
                        help="output directory (default: %(default)s)")
    parser.add_argument("--force", action="store_true",
                        help="bypass the length feasibility gate")
    args = parser.parse_args(argv)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    config: dict = {"length": args.L}
    if args.force:
        config["override_gate"] = True
    if args.n_steps is not None:
        config["strategy"] = {"n_steps": args.n_steps}
    config_path = outdir / "staircase_config.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True)
                           + "\n")

    code = cli.main(["staircase", "--config", str(config_path),
                     "--out", str(outdir)])

    outcome_path = outdir / "outcome.json"
    if outcome_path.exists():
        outcome = json.loads(outcome_path.read_text())
        print(f"\nsuccess:      {outcome.get('success')}")
        if "phase_times" in outcome:
            t1, t2, t3 = outcome["phase_times"]
            print(f"phases:       settle [0, {t1:g}], steer to path "
                  f"[{t1:g}, {t2:g}], dwell [{t2:g}, {t3:g}]")
        if "final_error" in outcome:
            print(f"final error:  {outcome['final_error']:.3e}")
        dwell = outcome.get("dwell")
        if dwell:
            print(f"dwell:        {dwell['n_corrections']} corrections over "
                  f"{dwell['n_steps']} steps, max tracking error "
                  f"{dwell['max_error']:.3e}")
        if outcome.get("message"):
            print(f"message:      {outcome['message']}")
        if outcome.get("error"):
            print(f"error:        {outcome['error']}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
