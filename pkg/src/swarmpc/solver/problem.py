"""Problem description shared by the inner and outer solvers."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np


class NonFiniteOracle(FloatingPointError):
    """An oracle returned NaN or inf; almost always a modelling bug upstream."""


@dataclass(frozen=True)
class BoxSet:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal shapes")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def tiled(cls, lower, upper, reps: int) -> "BoxSet":
        return cls(np.tile(np.asarray(lower, float), reps), np.tile(np.asarray(upper, float), reps))

    @property
    def n(self) -> int:
        return self.lower.size


def project_box(z, box: BoxSet) -> np.ndarray:
    return np.minimum(np.maximum(z, box.lower), box.upper)


@dataclass
class ParametricProblem:
    """Smooth cost ``f`` and constraint map ``F(u) <= 0`` over a box.

    ``fused_psi`` and ``fused_psi_value`` are optional accelerated oracles with
    signatures ``(u, c, y) -> (psi, grad)`` and ``(u, c, y) -> psi``. When absent
    the augmented cost is assembled from the four basic oracles.

    ``jit_psi`` is an optional ``(oracle, data)`` pair for the nopython PANOC
    loop, where ``oracle(u, c, y, data, want_grad, grad_out) -> psi`` is a numba
    function.
    """

    n: int
    m: int
    cost: Callable[[np.ndarray], float]
    cost_grad: Callable[[np.ndarray], np.ndarray]
    cmap: Callable[[np.ndarray], np.ndarray]
    cmap_jtv: Callable[[np.ndarray, np.ndarray], np.ndarray]
    box: BoxSet
    fused_psi: Callable | None = None
    fused_psi_value: Callable | None = None
    jit_psi: tuple | None = None

    def __post_init__(self):
        if self.box.n != self.n:
            raise ValueError(f"box has dimension {self.box.n}, expected {self.n}")


def _checked(val, what):
    if not np.all(np.isfinite(val)):
        raise NonFiniteOracle(f"{what} returned a non-finite value")
    return val


def psi_value(u, c: float, y, problem: ParametricProblem) -> float:
    """Augmented cost ``f(u) + c/2 * ||max(0, F(u) + y/c)||^2``."""
    if problem.fused_psi_value is not None:
        return _checked(problem.fused_psi_value(u, c, y), "psi")
    f = _checked(problem.cost(u), "cost")
    if problem.m == 0:
        return float(f)
    z = np.maximum(_checked(problem.cmap(u), "cmap") + y / c, 0.0)
    return float(f + 0.5 * c * z.dot(z))


def psi_grad(u, c: float, y, problem: ParametricProblem) -> np.ndarray:
    return psi_value_and_grad(u, c, y, problem)[1]


def psi_value_and_grad(u, c: float, y, problem: ParametricProblem) -> tuple[float, np.ndarray]:
    if problem.fused_psi is not None:
        val, g = problem.fused_psi(u, c, y)
        _checked(val, "psi")
        return val, _checked(g, "psi gradient")
    f = _checked(problem.cost(u), "cost")
    g = np.array(_checked(problem.cost_grad(u), "cost gradient"), dtype=float)
    if problem.m == 0:
        return float(f), g
    z = np.maximum(_checked(problem.cmap(u), "cmap") + y / c, 0.0)
    if np.any(z > 0):
        g += c * _checked(problem.cmap_jtv(u, z), "cmap jtv")
    return float(f + 0.5 * c * z.dot(z)), g


class Budget:
    """Work limit for one solve: a wall-clock deadline, an inner-iteration cap, or both."""

    def __init__(self, seconds: float | None = None, iterations: int | None = None):
        self.start = time.perf_counter()
        self.deadline = None if seconds is None else self.start + seconds
        self.iterations_left = iterations

    def spend(self, k: int = 1):
        if self.iterations_left is not None:
            self.iterations_left -= k

    def exhausted(self) -> bool:
        if self.iterations_left is not None and self.iterations_left <= 0:
            return True
        return self.deadline is not None and time.perf_counter() >= self.deadline

    def elapsed(self) -> float:
        return time.perf_counter() - self.start
