"""Run-log export (CSV + JSON) and re-import.

Trajectory, distance and non-cooperative files are pure functions of the
scenario and seed, so two equal runs produce identical bytes. Wall-clock solve
times go to ``timing.csv`` on their own.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from swarmpc.swarm import RunLog

STATE_COLS = ["px", "py", "pz", "vx", "vy", "vz", "phi", "theta"]
INPUT_COLS = ["T", "phi_ref", "theta_ref"]
DIAG_COLS = ["fpr", "infeasibility", "y_norm", "inner_iters", "outer_iters", "converged", "fallback"]


def _f(x) -> str:
    return repr(float(x))


def write_log(log: RunLog, outdir) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    K1, n, _ = log.states.shape
    n_obs = log.selected.shape[2]
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "time", "id", *STATE_COLS, *INPUT_COLS, *DIAG_COLS,
                    *[f"obs{s}" for s in range(n_obs)]])
        for k in range(K1):
            t = _f(k * log.control_dt)
            for a, ident in enumerate(log.agent_ids):
                w.writerow([k, t, ident, *map(_f, log.states[k, a]), *map(_f, log.inputs[k, a]),
                            _f(log.fpr[k, a]), _f(log.infeasibility[k, a]), _f(log.y_norm[k, a]),
                            int(log.inner_iters[k, a]), int(log.outer_iters[k, a]),
                            int(log.converged[k, a]), int(log.fallback[k, a]),
                            *map(int, log.selected[k, a])])
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "id", "solve_time"])
        for k in range(K1):
            for a, ident in enumerate(log.agent_ids):
                w.writerow([k, ident, _f(log.solve_time[k, a])])
    with open(out / "distances.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "time", "min_dist", "min_dist_nc"])
        for k in range(K1):
            w.writerow([k, _f(k * log.control_dt), _f(log.min_dist[k]), _f(log.min_dist_nc[k])])
    with open(out / "noncooperative.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "time", "id", "px", "py", "pz"])
        for k in range(K1):
            for b, ident in enumerate(log.nc_ids):
                w.writerow([k, _f(k * log.control_dt), ident, *map(_f, log.nc_positions[k, b])])
    meta = {"agent_ids": list(log.agent_ids), "nc_ids": list(log.nc_ids),
            "control_dt": log.control_dt, "budget": log.budget, **log.meta}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def _rows(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, list(r)


def read_log(logdir) -> RunLog:
    d = Path(logdir)
    if not (d / "meta.json").exists():
        raise FileNotFoundError(f"{d} has no meta.json; not a run directory")
    meta = json.loads((d / "meta.json").read_text())
    ids = meta.pop("agent_ids")
    nc_ids = meta.pop("nc_ids")
    control_dt = meta.pop("control_dt")
    budget = meta.pop("budget")
    col = {a: i for i, a in enumerate(ids)}
    ncol = {a: i for i, a in enumerate(nc_ids)}

    header, rows = _rows(d / "trajectory.csv")
    n = len(ids)
    K1 = len(rows) // n if n else 0
    n_obs = sum(h.startswith("obs") for h in header)
    states = np.empty((K1, n, 8))
    inputs = np.empty((K1, n, 3))
    fl = {c: np.empty((K1, n)) for c in ("fpr", "infeasibility", "y_norm")}
    it = {c: np.zeros((K1, n), dtype=int) for c in ("inner_iters", "outer_iters")}
    bo = {c: np.zeros((K1, n), dtype=bool) for c in ("converged", "fallback")}
    selected = np.empty((K1, n, n_obs), dtype=int)
    for row in rows:
        k, a = int(row[0]), col[int(row[2])]
        vals = row[3:]
        states[k, a] = [float(v) for v in vals[0:8]]
        inputs[k, a] = [float(v) for v in vals[8:11]]
        fl["fpr"][k, a], fl["infeasibility"][k, a], fl["y_norm"][k, a] = map(float, vals[11:14])
        it["inner_iters"][k, a], it["outer_iters"][k, a] = int(vals[14]), int(vals[15])
        bo["converged"][k, a], bo["fallback"][k, a] = vals[16] == "1", vals[17] == "1"
        selected[k, a] = [int(v) for v in vals[18:18 + n_obs]]

    solve_time = np.full((K1, n), np.nan)
    if (d / "timing.csv").exists():
        for row in _rows(d / "timing.csv")[1]:
            solve_time[int(row[0]), col[int(row[1])]] = float(row[2])

    min_d = np.empty(K1)
    min_nc = np.empty(K1)
    for row in _rows(d / "distances.csv")[1]:
        min_d[int(row[0])] = float(row[2])
        min_nc[int(row[0])] = float(row[3])

    nc_pos = np.empty((K1, len(nc_ids), 3))
    if nc_ids:
        for row in _rows(d / "noncooperative.csv")[1]:
            nc_pos[int(row[0]), ncol[int(row[2])]] = [float(v) for v in row[3:6]]

    return RunLog(agent_ids=ids, nc_ids=nc_ids, control_dt=control_dt, budget=budget,
                  states=states, inputs=inputs, solve_time=solve_time, selected=selected,
                  min_dist=min_d, min_dist_nc=min_nc, nc_positions=nc_pos, meta=meta,
                  **fl, **it, **bo)
