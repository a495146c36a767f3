"""Command line: ``swarmpc run``, ``swarmpc metrics``, ``swarmpc scenarios list``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from swarmpc.logio import read_log, write_log
from swarmpc.metrics import metrics_report
from swarmpc.scenario import BUILTINS, ParseError, ValidationError, dump_scenario, resolve, with_overrides
from swarmpc.swarm import ScenarioInvalid, simulate

EXIT_INVALID = 2


def run(config, outdir, progress: bool = False) -> dict:
    """Simulate, export the log and return the metrics summary."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    dump_scenario(config, out / "scenario.json")

    def tick(k, K):
        if k % 100 == 0 or k == K:
            print(f"\r  tick {k}/{K}", end="", file=sys.stderr, flush=True)

    t0 = time.perf_counter()
    log = simulate(config, progress=tick if progress else None)
    if progress:
        print(file=sys.stderr)
    write_log(log, out)
    summary = metrics_report(log).summary()
    summary["wall_time"] = time.perf_counter() - t0
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _cmd_run(args) -> int:
    cfg = with_overrides(resolve(args.scenario), seed=args.seed, duration=args.duration)
    summary = run(cfg, args.out, progress=not args.quiet)
    keys = ("global_min_dist", "global_min_dist_nc", "solve_time_mean", "solve_time_p99",
            "nonconvergence_rate", "final_error_max", "wall_time")
    for k in keys:
        if k in summary:
            print(f"{k}: {summary[k]}")
    print(f"log written to {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    summary = metrics_report(read_log(args.logdir)).summary()
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_scenarios(args) -> int:
    for name, fn in BUILTINS.items():
        doc = (fn.__doc__ or "").strip().splitlines()
        print(f"{name:16s} {doc[0] if doc else ''}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarmpc", description="Distributed NMPC swarm simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario file or built-in")
    r.add_argument("scenario", help="path to a YAML/JSON scenario or a built-in name")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--duration", type=float, default=None, help="override duration, seconds")
    r.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    r.set_defaults(func=_cmd_run)

    m = sub.add_parser("metrics", help="recompute metrics from an exported log directory")
    m.add_argument("logdir")
    m.set_defaults(func=_cmd_metrics)

    s = sub.add_parser("scenarios", help="list built-in scenarios")
    s.add_argument("action", choices=["list"])
    s.set_defaults(func=_cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError, ScenarioInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
