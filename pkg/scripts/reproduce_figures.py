#!/usr/bin/env python3
"""Regenerate the bundled reference experiments into a results tree.

Runs every named preset of the ``rdcontrol`` CLI (plus the threshold
report) and collects the artifacts under one directory:

    results/
      thresholds/   threshold report for the default bistable model
      cas1/         static boundary values at the unstable level, L=5
      cas2/         terminal-cost optimal control, L=8,  T=20
      cas3/         terminal-cost optimal control, L=12, T=100 (stalls)
      mintime2/     minimal-time steering, independent boundary controls
      mintime1/     minimal-time steering, tied boundary controls

Each run goes through the normal CLI entry point, so the artifacts are
byte-identical to what ``rdcontrol <command> --preset <name>`` produces.

``--quick`` trims the optimizer iteration budgets for a fast smoke pass
(the resulting data is NOT publication quality) and skips the two
minimal-time runs, which are long by nature.  Any override file written
for a quick run is kept next to the artifacts for reproducibility.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from rdcontrol import cli

EXPERIMENTS: dict[str, tuple[str, str | None]] = {
    # name -> (subcommand, preset)
    "thresholds": ("thresholds", None),
    "cas1": ("simulate", "cas1"),
    "cas2": ("optimize", "cas2"),
    "cas3": ("optimize", "cas3"),
    "mintime2": ("mintime", "mintime2"),
    "mintime1": ("mintime", "mintime1"),
}

QUICK_OVERRIDES: dict[str, dict] = {
    "optimize": {"max_iters": 60},
}
QUICK_SKIP = ("mintime2", "mintime1")


def run_one(name: str, outdir: Path, quick: bool) -> int:
    command, preset = EXPERIMENTS[name]
    rundir = outdir / name
    rundir.mkdir(parents=True, exist_ok=True)
    argv = [command]
    if preset is not None:
        argv += ["--preset", preset]
    if quick and command in QUICK_OVERRIDES:
        override_path = rundir / "quick_overrides.json"
        override_path.write_text(
            json.dumps(QUICK_OVERRIDES[command], indent=2, sort_keys=True)
            + "\n")
        argv += ["--config", str(override_path)]
    argv += ["--out", str(rundir)]

    print(f"--- {name}: rdcontrol {' '.join(argv)}", flush=True)
    t0 = time.perf_counter()
    code = cli.main(argv)
    print(f"--- {name}: exit {code} in {time.perf_counter() - t0:.1f}s",
          flush=True)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--outdir", default="results", metavar="DIR",
                        help="root directory for the results tree "
                             "(default: %(default)s)")
    parser.add_argument("--only", nargs="+", choices=sorted(EXPERIMENTS),
                        metavar="NAME",
                        help="run only these experiments "
                             f"(choices: {', '.join(sorted(EXPERIMENTS))})")
    parser.add_argument("--quick", action="store_true",
                        help="reduced iteration budgets; skips the "
                             "minimal-time runs unless named via --only")
    args = parser.parse_args(argv)

    names = args.only or [n for n in EXPERIMENTS
                          if not (args.quick and n in QUICK_SKIP)]
    outdir = Path(args.outdir)
    failures: list[tuple[str, int]] = []
    for name in names:
        code = run_one(name, outdir, args.quick)
        if code != 0:
            failures.append((name, code))

    if failures:
        for name, code in failures:
            print(f"FAILED: {name} (exit {code})", file=sys.stderr)
        return 1
    print(f"all {len(names)} experiment(s) written under {outdir}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
