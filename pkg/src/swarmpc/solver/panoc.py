"""PANOC: projected-gradient steps accelerated by L-BFGS directions.

The line search enforces decrease of the forward-backward envelope

    phi_gamma(u) = psi(u) - grad(u).r + |r|^2 / (2 gamma),   r = u - proj(u - gamma grad(u))

and falls back to the plain projected-gradient point when the quasi-Newton
direction is rejected too many times.
"""

from __future__ import annotations

from typing import NamedTuple

import time

import numpy as np

from swarmpc.solver._lbfgs import LBFGSMemory
from swarmpc.solver._panoc_jit import NONFINITE, STEP_COLLAPSE, panoc_core
from swarmpc.solver.problem import (
    Budget,
    NonFiniteOracle,
    ParametricProblem,
    project_box,
    psi_value,
    psi_value_and_grad,
)

GAMMA_L = 0.95
LS_BETA = 0.5
MAX_BACKTRACKS = 10
MIN_LIPSCHITZ = 1e-6


class PanocResult(NamedTuple):
    u: np.ndarray
    inner_iters: int
    fpr_norm: float
    converged: bool


def _estimate_lipschitz(u, g, c, y, problem) -> float:
    h = np.maximum(1e-6, 1e-6 * np.abs(u))
    _, g2 = psi_value_and_grad(u + h, c, y, problem)
    return max(MIN_LIPSCHITZ, float(np.linalg.norm(g2 - g) / np.linalg.norm(h)))


class _Point:
    __slots__ = ("u", "psi", "g", "ubar", "r", "fbe")

    def __init__(self, u, psi, g, gamma, box):
        self.u = u
        self.psi = psi
        self.g = g
        self.refresh(gamma, box)

    def refresh(self, gamma, box):
        self.ubar = project_box(self.u - gamma * self.g, box)
        self.r = self.u - self.ubar
        self.fbe = self.psi - self.g.dot(self.r) + self.r.dot(self.r) / (2.0 * gamma)


def panoc_solve(
    c: float,
    y,
    problem: ParametricProblem,
    u0,
    eps_bar: float,
    budget: Budget | None = None,
    memory: int | LBFGSMemory = 10,
    max_iters: int = 10_000,
    use_jit: bool = True,
) -> PanocResult:
    """Minimize ``psi(.; c, y)`` over the problem's box to fixed-point residual ``eps_bar``.

    The returned point is the projected (half-step) iterate, so it always lies
    in the box. ``converged`` is False when the budget or ``max_iters`` ran out
    first; the iterate is then the best one reached. Problems carrying a
    ``jit_psi`` oracle run the nopython loop unless ``use_jit`` is False.
    """
    y = np.asarray(y, dtype=float)
    if isinstance(memory, LBFGSMemory):
        mem = memory
        mem.reset()
    else:
        mem = LBFGSMemory(problem.n, memory)
    if use_jit and problem.jit_psi is not None:
        return _panoc_jit(c, y, problem, u0, eps_bar, budget, mem, max_iters)
    box = problem.box

    u = project_box(np.asarray(u0, dtype=float), box)
    psi, g = psi_value_and_grad(u, c, y, problem)
    gamma = GAMMA_L / _estimate_lipschitz(u, g, c, y, problem)
    cur = _Point(u, psi, g, gamma, box)
    gamma = _lipschitz_backtrack(cur, gamma, c, y, problem, mem)

    it = 0
    while True:
        fpr = float(np.max(np.abs(cur.r))) / gamma if cur.r.size else 0.0
        if fpr <= eps_bar:
            return PanocResult(cur.ubar.copy(), it, fpr, True)
        if it >= max_iters or (budget is not None and budget.exhausted()):
            return PanocResult(cur.ubar.copy(), it, fpr, False)

        # quasi-Newton direction on the residual map R(u) = r / gamma
        d = -mem.apply(cur.r / gamma, gamma)
        sigma = LS_BETA * (1.0 - GAMMA_L) / (2.0 * gamma)
        threshold = cur.fbe - sigma * cur.r.dot(cur.r)
        tau = 1.0
        for k in range(MAX_BACKTRACKS + 1):
            if k == MAX_BACKTRACKS:
                tau = 0.0
            u_new = cur.ubar.copy() if tau == 0.0 else cur.u - (1.0 - tau) * cur.r + tau * d
            psi_new, g_new = psi_value_and_grad(u_new, c, y, problem)
            nxt = _Point(u_new, psi_new, g_new, gamma, box)
            if tau == 0.0 or nxt.fbe <= threshold:
                break
            tau *= 0.5

        it += 1
        if budget is not None:
            budget.spend()
        r_old = cur.r / gamma
        s = nxt.u - cur.u
        cur = nxt
        new_gamma = _lipschitz_backtrack(cur, gamma, c, y, problem, mem)
        if new_gamma == gamma:
            mem.push(s, cur.r / gamma - r_old)
        gamma = new_gamma


def _panoc_jit(c, y, problem, u0, eps_bar, budget, mem, max_iters) -> PanocResult:
    oracle, data = problem.jit_psi
    iters_cap = max_iters
    remaining = np.inf
    if budget is not None:
        if budget.iterations_left is not None:
            iters_cap = min(iters_cap, max(budget.iterations_left, 0))
        if budget.deadline is not None:
            remaining = budget.deadline - time.perf_counter()
    u_out = np.empty(problem.n)
    it, fpr, code = panoc_core(
        oracle, data, float(c), y, np.asarray(u0, dtype=float), problem.box.lower,
        problem.box.upper, float(eps_bar), int(iters_cap), float(remaining),
        mem.S, mem.Y, mem.rho, u_out,
    )
    if code == NONFINITE:
        raise NonFiniteOracle("augmented cost oracle returned a non-finite value")
    if code == STEP_COLLAPSE:
        raise NonFiniteOracle("step size collapsed; gradient is not Lipschitz on the box")
    if budget is not None:
        budget.spend(it)
    return PanocResult(u_out, int(it), float(fpr), code == 1)


def _lipschitz_backtrack(pt: _Point, gamma, c, y, problem, mem) -> float:
    """Shrink ``gamma`` until the quadratic upper bound holds at the half step."""
    box = problem.box
    for _ in range(60):
        psi_bar = psi_value(pt.ubar, c, y, problem)
        lip = GAMMA_L / gamma
        bound = pt.psi - pt.g.dot(pt.r) + 0.5 * lip * pt.r.dot(pt.r)
        if psi_bar <= bound + 1e-12 * max(1.0, abs(pt.psi)):
            return gamma
        gamma *= 0.5
        mem.reset()
        pt.refresh(gamma, box)
    raise NonFiniteOracle("step size collapsed; gradient is not Lipschitz on the box")
