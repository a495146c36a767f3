"""Augmented Lagrangian outer loop around PANOC for ``min f(u) s.t. F(u) <= 0, u in box``."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from swarmpc.solver._lbfgs import LBFGSMemory
from swarmpc.solver.panoc import panoc_solve
from swarmpc.solver.problem import Budget, ParametricProblem, project_box


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_OUTER_ITERATIONS = "MaxOuterIterations"
    TIME_BUDGET_EXHAUSTED = "TimeBudgetExhausted"


@dataclass(frozen=True)
class AlmSettings:
    eps: float = 1e-4
    delta: float = 1e-3
    rho: float = 1.5
    c0: float = 1000.0
    theta_sd: float = 0.25
    nu_max: int = 10
    y_clamp: float = 1e6
    eps_init: float = 1e-3
    time_budget: float | None = 0.040
    # deterministic work cap (total inner iterations per solve); None disables
    max_inner_iters: int | None = None
    lbfgs_memory: int = 10

    def __post_init__(self):
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        if not 0 < self.theta_sd < 1:
            raise ValueError("theta_sd must lie in (0, 1)")
        if self.eps > self.eps_init:
            raise ValueError("eps must not exceed eps_init")
        for name in ("eps", "delta", "c0", "y_clamp"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.nu_max < 1:
            raise ValueError("nu_max must be >= 1")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("time_budget must be positive")

    def budget(self) -> Budget:
        return Budget(self.time_budget, self.max_inner_iters)


@dataclass
class SolverOutcome:
    u_star: np.ndarray
    y_star: np.ndarray
    status: Status
    fpr_norm: float
    infeasibility: float
    outer_iters: int
    inner_iters_total: int
    solve_time: float
    penalty_final: float
    inner_iters_per_outer: list[int] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def infeasibility(problem: ParametricProblem, u) -> float:
    if problem.m == 0:
        return 0.0
    return float(np.max(np.maximum(problem.cmap(u), 0.0)))


def alm_solve(
    problem: ParametricProblem,
    u0,
    y0,
    settings: AlmSettings = AlmSettings(),
    budget: Budget | None = None,
    memory: LBFGSMemory | None = None,
) -> SolverOutcome:
    """Solve to an (eps, delta)-approximate KKT point, or return the best iterate.

    Multipliers are clamped to ``[0, y_clamp]`` before each inner solve and
    updated as ``max(0, y + c F(u))``. The penalty grows by ``rho`` whenever the
    multiplier change fails to shrink by ``theta_sd``.
    """
    s = settings
    budget = budget if budget is not None else s.budget()
    mem = memory if memory is not None else LBFGSMemory(problem.n, s.lbfgs_memory)
    u = project_box(np.asarray(u0, dtype=float), problem.box)
    y = np.asarray(y0, dtype=float).copy()
    if y.shape != (problem.m,):
        raise ValueError(f"y0 has shape {y.shape}, expected ({problem.m},)")
    c = s.c0
    eps_bar = s.eps_init
    z_prev = None
    inner_total = 0
    per_outer = []
    fpr = np.inf
    status = Status.MAX_OUTER_ITERATIONS

    for nu in range(s.nu_max):
        y_bar = np.clip(y, 0.0, s.y_clamp)
        res = panoc_solve(c, y_bar, problem, u, eps_bar, budget=budget, memory=mem)
        u, fpr = res.u, res.fpr_norm
        inner_total += res.inner_iters
        per_outer.append(res.inner_iters)
        if problem.m:
            y_new = np.maximum(0.0, y_bar + c * problem.cmap(u))
            z = float(np.max(np.abs(y_new - y)))
        else:
            y_new, z = y, 0.0
        y = y_new
        if not res.converged:
            status = Status.TIME_BUDGET_EXHAUSTED
            break
        if z <= c * s.delta and eps_bar <= s.eps:
            status = Status.CONVERGED
            break
        if nu > 0 and z > s.theta_sd * z_prev:
            c *= s.rho
        z_prev = z
        eps_bar = max(s.eps, 0.5 * eps_bar)

    return SolverOutcome(
        u_star=u,
        y_star=y,
        status=status,
        fpr_norm=fpr,
        infeasibility=infeasibility(problem, u),
        outer_iters=len(per_outer),
        inner_iters_total=inner_total,
        solve_time=budget.elapsed(),
        penalty_final=c,
        inner_iters_per_outer=per_outer,
    )
