#!/usr/bin/env python3
"""Plot an exported run: top-down paths, minimum distance over time, solve-time histogram, ||y*||.

    python3 scripts/plot_run.py runs/team-swap --save team-swap.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from swarmpc.logio import read_log  # noqa: E402
from swarmpc.metrics import metrics_report  # noqa: E402


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("logdir")
    p.add_argument("--save", default=None, help="output image (default: <logdir>/overview.png)")
    args = p.parse_args()

    log = read_log(args.logdir)
    m = metrics_report(log)
    t = np.arange(log.n_ticks) * log.control_dt

    fig, ax = plt.subplots(2, 2, figsize=(11, 8))
    for a, ident in enumerate(log.agent_ids):
        ax[0, 0].plot(log.states[:, a, 0], log.states[:, a, 1], lw=1, label=str(ident))
    for b, ident in enumerate(log.nc_ids):
        ax[0, 0].plot(log.nc_positions[:, b, 0], log.nc_positions[:, b, 1], "k--", lw=1.5, label=f"nc {ident}")
    ax[0, 0].set_aspect("equal")
    ax[0, 0].set_xlabel("x [m]")
    ax[0, 0].set_ylabel("y [m]")
    ax[0, 0].set_title("paths (top view)")

    ax[0, 1].plot(t, m.min_dist, label="agent-agent")
    if log.nc_ids:
        ax[0, 1].plot(t, m.min_dist_nc, label="agent-intruder")
    ax[0, 1].axhline(0.3, color="r", ls=":", lw=1)
    ax[0, 1].set_xlabel("t [s]")
    ax[0, 1].set_ylabel("min distance [m]")
    ax[0, 1].set_ylim(0, 2.0)
    ax[0, 1].legend()

    widths = np.diff(m.hist_edges) * 1e3
    ax[1, 0].bar(m.hist_edges[:-1] * 1e3, m.hist_counts, width=widths, align="edge")
    ax[1, 0].set_xlabel("solve time [ms]")
    ax[1, 0].set_ylabel("count")
    ax[1, 0].set_title(f"mean {1e3 * m.solve_time_mean:.2f} ms, max {1e3 * m.solve_time_max:.2f} ms")

    ax[1, 1].plot(t[:-1], m.y_norm, lw=0.8)
    ax[1, 1].set_xlabel("t [s]")
    ax[1, 1].set_ylabel("||y*||")

    fig.tight_layout()
    out = args.save or f"{args.logdir.rstrip('/')}/overview.png"
    fig.savefig(out, dpi=120)
    print(f"saved {out}")


if __name__ == "__main__":
    main()
