"""Summary statistics over a :class:`~swarmpc.swarm.RunLog`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from swarmpc.swarm import RunLog


@dataclass
class Metrics:
    min_dist: np.ndarray            # per tick, cooperative pairs
    global_min_dist: float
    min_dist_nc: np.ndarray         # per tick, cooperative vs non-cooperative
    global_min_dist_nc: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    solve_count: int
    solve_time_mean: float
    solve_time_max: float
    solve_time_p99: float
    nonconvergence_rate: float
    fallback_count: int
    fpr: np.ndarray                 # (ticks, agents)
    y_norm: np.ndarray
    infeasibility: np.ndarray
    inner_iters: np.ndarray
    final_errors: np.ndarray | None = None

    def summary(self) -> dict:
        def num(x):
            return None if x is None or not np.isfinite(x) else float(x)

        out = {
            "global_min_dist": num(self.global_min_dist),
            "global_min_dist_nc": num(self.global_min_dist_nc),
            "solve_count": self.solve_count,
            "solve_time_mean": num(self.solve_time_mean),
            "solve_time_max": num(self.solve_time_max),
            "solve_time_p99": num(self.solve_time_p99),
            "nonconvergence_rate": num(self.nonconvergence_rate),
            "fallback_count": self.fallback_count,
            "hist_edges": [float(e) for e in self.hist_edges],
            "hist_counts": [int(c) for c in self.hist_counts],
            "fpr_max": num(np.nanmax(self.fpr)) if self.fpr.size else None,
            "y_norm_max": num(np.nanmax(self.y_norm)) if self.y_norm.size else None,
            "infeasibility_max": num(np.nanmax(self.infeasibility)) if self.infeasibility.size else None,
            "inner_iters_mean": num(np.mean(self.inner_iters)) if self.inner_iters.size else None,
        }
        if self.final_errors is not None:
            out["final_error_max"] = num(np.max(self.final_errors))
        return out


def solve_time_histogram(times, budget: float, bins: int = 40):
    """Equal bins over [0, budget], plus one overflow bin up to the largest sample if needed."""
    t = np.asarray(times, float)
    t = t[np.isfinite(t)]
    edges = np.linspace(0.0, budget, bins + 1)
    if t.size and t.max() > budget:
        edges = np.append(edges, t.max())
    counts, _ = np.histogram(t, bins=edges)
    return edges, counts


def metrics_report(log: RunLog, bins: int = 40) -> Metrics:
    if log.n_ticks < 1:
        raise ValueError("empty run log")
    solved = slice(0, log.n_ticks - 1)     # the final row holds only the end state
    st = log.solve_time[solved]
    st = st[np.isfinite(st)]
    edges, counts = solve_time_histogram(st, log.budget, bins)
    conv = log.converged[solved]
    md = log.min_dist
    mdn = log.min_dist_nc
    targets = log.meta.get("targets")
    errs = None
    if targets is not None and len(targets) == len(log.agent_ids):
        errs = np.linalg.norm(log.states[-1, :, 0:3] - np.asarray(targets, float), axis=1)
    return Metrics(
        min_dist=md,
        global_min_dist=float(np.min(md)) if md.size else np.inf,
        min_dist_nc=mdn,
        global_min_dist_nc=float(np.min(mdn)) if mdn.size else np.inf,
        hist_edges=edges,
        hist_counts=counts,
        solve_count=int(st.size),
        solve_time_mean=float(st.mean()) if st.size else np.nan,
        solve_time_max=float(st.max()) if st.size else np.nan,
        solve_time_p99=float(np.percentile(st, 99)) if st.size else np.nan,
        nonconvergence_rate=float(1.0 - conv.mean()) if conv.size else 0.0,
        fallback_count=int(log.fallback[solved].sum()),
        fpr=log.fpr[solved],
        y_norm=log.y_norm[solved],
        infeasibility=log.infeasibility[solved],
        inner_iters=log.inner_iters[solved],
        final_errors=errs,
    )
