#!/usr/bin/env python3
"""Run every built-in scenario and print a one-line summary per run.

    python3 scripts/run_experiments.py --out runs/
    python3 scripts/run_experiments.py --out runs/ --only team-swap intruder --seed 3
"""

import argparse
import json
from pathlib import Path

from swarmpc.cli import run
from swarmpc.scenario import BUILTINS, builtin, with_overrides


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", default="runs", help="parent directory for the per-scenario logs")
    p.add_argument("--only", nargs="*", choices=sorted(BUILTINS), help="subset of built-ins")
    p.add_argument("--seed", type=int, default=None)
    args = p.parse_args()

    names = args.only or list(BUILTINS)
    rows = {}
    for name in names:
        cfg = with_overrides(builtin(name), seed=args.seed)
        s = run(cfg, Path(args.out) / name)
        rows[name] = s
        nc = s.get("global_min_dist_nc")
        print(f"{name:15s} min {s['global_min_dist'] or float('nan'):.3f} m"
              + (f"  intruder {nc:.3f} m" if nc is not None else "")
              + f"  nonconv {100 * s['nonconvergence_rate']:.2f}%"
              + f"  solve mean {1e3 * s['solve_time_mean']:.2f} ms p99 {1e3 * s['solve_time_p99']:.2f} ms"
              + f"  final err {s.get('final_error_max', float('nan')):.3f} m"
              + f"  wall {s['wall_time']:.1f} s")
    (Path(args.out) / "summary.json").write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
