"""Per-agent NMPC: single-shooting cost, spherical obstacle constraints, adaptive weights."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from swarmpc import _kernels as K
from swarmpc.model import NU, NX, ModelParams, rollout
from swarmpc.solver import (
    AlmSettings,
    BoxSet,
    Budget,
    NonFiniteOracle,
    ParametricProblem,
    SolverOutcome,
    Status,
    alm_solve,
)
from swarmpc.solver._lbfgs import LBFGSMemory

log = logging.getLogger(__name__)

INACTIVE_DEPTH = 1e3


@dataclass(frozen=True)
class Weights:
    q_x: tuple = (6.0, 6.0, 45.0, 6.0, 6.0, 6.0, 8.0, 8.0)
    q_u: tuple = (5.0, 10.0, 10.0)
    q_du: tuple = (10.0, 20.0, 20.0)
    q_t: tuple = (40.0, 40.0, 150.0, 20.0, 20.0, 20.0, 30.0, 30.0)
    q_p_min: tuple = (1.0, 1.0, 15.0)
    q_p_max: tuple = (6.0, 6.0, 45.0)
    b: float = 0.01

    def __post_init__(self):
        if len(self.q_x) != NX or len(self.q_t) != NX:
            raise ValueError("q_x and q_t need 8 entries")
        if len(self.q_u) != NU or len(self.q_du) != NU:
            raise ValueError("q_u and q_du need 3 entries")
        vals = [*self.q_x, *self.q_u, *self.q_du, *self.q_t, *self.q_p_min, *self.q_p_max, self.b]
        if min(vals) <= 0:
            raise ValueError("all weights must be positive")
        if any(lo > hi for lo, hi in zip(self.q_p_min, self.q_p_max)):
            raise ValueError("q_p_min must not exceed q_p_max")


@dataclass(frozen=True)
class ControllerConfig:
    model: ModelParams = ModelParams()
    weights: Weights = Weights()
    solver: AlmSettings = AlmSettings()
    u_min: tuple = (5.0, -0.25, -0.25)
    u_max: tuple = (12.5, 0.25, 0.25)
    n_obs: int = 3

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min must not exceed u_max")
        if self.n_obs < 0:
            raise ValueError("n_obs must be >= 0")


@dataclass
class Setpoint:
    x_ref: np.ndarray
    u_ref: np.ndarray

    @classmethod
    def hover_at(cls, p, model: ModelParams = ModelParams()) -> "Setpoint":
        x = np.zeros(NX)
        x[:3] = p
        return cls(x, model.hover_input())


@dataclass
class ObstacleSet:
    """Fixed-size set of obstacle tracks; ``centers`` has shape (n_obs, N+1, 3)."""

    centers: np.ndarray
    radii: np.ndarray
    active: np.ndarray
    ids: list = field(default_factory=list)

    @property
    def n_obs(self) -> int:
        return self.centers.shape[0]

    @classmethod
    def empty(cls, n_obs: int, horizon: int) -> "ObstacleSet":
        centers = np.zeros((n_obs, horizon + 1, 3))
        centers[:, :, 2] = -INACTIVE_DEPTH
        return cls(centers, np.zeros(n_obs), np.zeros(n_obs, dtype=bool), [None] * n_obs)

    def set_track(self, slot: int, positions, radius: float, ident=None):
        self.centers[slot] = positions
        self.radii[slot] = radius
        self.active[slot] = True
        self.ids[slot] = ident


@dataclass
class NmpcSolution:
    u_seq: np.ndarray
    predicted_states: np.ndarray
    y_star: np.ndarray
    outcome: SolverOutcome | None
    fallback: bool = False
    obstacle_ids: list = field(default_factory=list)

    @property
    def applied_input(self) -> np.ndarray:
        return self.u_seq[0]

    def shifted_inputs(self) -> np.ndarray:
        """Drop the first input and repeat the last one."""
        return np.vstack([self.u_seq[1:], self.u_seq[-1:]])

    def shifted_multipliers(self, obstacles: ObstacleSet) -> np.ndarray:
        """Previous multipliers advanced one step and re-slotted by obstacle id.

        Slots whose obstacle was not constrained last period start at zero.
        """
        N = self.u_seq.shape[0]
        y0 = np.zeros(obstacles.n_obs * N)
        prev = list(self.obstacle_ids)
        for slot in range(obstacles.n_obs):
            if not obstacles.active[slot]:
                continue
            ident = obstacles.ids[slot] if slot < len(obstacles.ids) else None
            if ident is not None:
                src = prev.index(ident) if ident in prev else None
            else:
                src = slot if slot < len(prev) and prev[slot] is None else None
            if src is None or (src + 1) * N > self.y_star.size:
                continue
            block = self.y_star[src * N:(src + 1) * N]
            y0[slot * N:slot * N + N - 1] = block[1:]
        return y0


def _pack(setpoint: Setpoint, u_prev, weights: Weights, q_p=None) -> np.ndarray:
    q_x = np.array(weights.q_x, dtype=float)
    if q_p is not None:
        q_x[:3] = q_p
    return np.concatenate([
        setpoint.x_ref, setpoint.u_ref, np.asarray(u_prev, float), q_x,
        weights.q_u, weights.q_du, weights.q_t,
    ]).astype(float)


_NO_OBS = np.zeros((0, 1, 3))
_NO_RAD = np.zeros(0)
_NO_Y = np.zeros(0)


def stage_cost(x, u, u_prev, setpoint: Setpoint, weights: Weights, q_p=None) -> float:
    q_x = np.array(weights.q_x, dtype=float)
    if q_p is not None:
        q_x[:3] = q_p
    ex = setpoint.x_ref - np.asarray(x, float)
    eu = setpoint.u_ref - np.asarray(u, float)
    du = np.asarray(u, float) - np.asarray(u_prev, float)
    return float(ex @ (q_x * ex) + eu @ (np.asarray(weights.q_u) * eu)
                 + du @ (np.asarray(weights.q_du) * du))


def _cost_data(u, x_hat, u_prev, setpoint, weights, model, q_p):
    N = u.size // NU
    par = _pack(setpoint, u_prev, weights, q_p)
    return (np.asarray(x_hat, float), model.packed(), par, _NO_OBS, _NO_RAD,
            np.empty((N + 1, NX)), np.empty((N, 4)))


def total_cost(u_seq, x_hat, u_prev, setpoint: Setpoint, weights: Weights,
               model: ModelParams = ModelParams(), q_p=None) -> float:
    """Tracking cost of an input sequence, terminal term included."""
    u = np.ascontiguousarray(u_seq, dtype=float).ravel()
    data = _cost_data(u, x_hat, u_prev, setpoint, weights, model, q_p)
    return K.psi_oracle(u, 0.0, _NO_Y, data, False, np.empty(0))


def cost_gradient(u_seq, x_hat, u_prev, setpoint: Setpoint, weights: Weights,
                  model: ModelParams = ModelParams(), q_p=None) -> np.ndarray:
    """Gradient of :func:`total_cost` by a backward adjoint sweep."""
    u = np.ascontiguousarray(u_seq, dtype=float).ravel()
    data = _cost_data(u, x_hat, u_prev, setpoint, weights, model, q_p)
    grad = np.empty(u.size)
    K.psi_oracle(u, 0.0, _NO_Y, data, True, grad)
    return grad


def constraint_map(u_seq, x_hat, obstacles: ObstacleSet,
                   model: ModelParams = ModelParams()) -> np.ndarray:
    """``r^2 - |p_j - o_j|^2`` for j = 1..N, obstacle-major; nonpositive means clear."""
    u = np.ascontiguousarray(u_seq, dtype=float).ravel()
    N = u.size // NU
    out = np.empty(obstacles.n_obs * N)
    K.cmap_kernel(u, np.asarray(x_hat, float), model.packed(),
                  np.ascontiguousarray(obstacles.centers, dtype=float),
                  np.asarray(obstacles.radii, float), out, np.empty((N + 1, NX)), np.empty((N, 4)))
    return out


def constraint_jtv(u_seq, x_hat, obstacles: ObstacleSet, w,
                   model: ModelParams = ModelParams()) -> np.ndarray:
    u = np.ascontiguousarray(u_seq, dtype=float).ravel()
    N = u.size // NU
    grad = np.empty(u.size)
    K.cmap_jtv_kernel(u, np.asarray(x_hat, float), model.packed(),
                      np.ascontiguousarray(obstacles.centers, dtype=float), np.asarray(w, float),
                      grad, np.empty((N + 1, NX)), np.empty((N, 4)))
    return grad


def adapt_weights(y_star, weights: Weights, horizon: int) -> np.ndarray:
    """Position weights shrunk towards ``q_p_min`` as the multipliers grow."""
    y_star = np.asarray(y_star, dtype=float)
    l = np.arange(y_star.size)
    w = weights.b * (1.0 - (l % horizon) / horizon)
    scale = 1.0 / (float(w @ y_star) + 1.0)
    lo = np.asarray(weights.q_p_min, float)
    hi = np.asarray(weights.q_p_max, float)
    return lo + (hi - lo) * scale


def build_problem(x_hat, u_prev, setpoint: Setpoint, obstacles: ObstacleSet,
                  config: ControllerConfig, q_p=None) -> ParametricProblem:
    model = config.model
    N = model.horizon
    n, m = NU * N, obstacles.n_obs * N
    x0 = np.asarray(x_hat, dtype=float).copy()
    prm = model.packed()
    par = _pack(setpoint, u_prev, config.weights, q_p)
    obs = np.ascontiguousarray(obstacles.centers, dtype=float)
    rad = np.asarray(obstacles.radii, dtype=float)
    if obs.shape[1] != N + 1:
        raise ValueError(f"obstacle tracks need {N + 1} points, got {obs.shape[1]}")
    xs = np.empty((N + 1, NX))
    trig = np.empty((N, 4))
    data = (x0, prm, par, obs, rad, xs, trig)
    grad = np.empty(n)
    no_y = np.zeros(m)

    def fused(u, c, y):
        val = K.psi_oracle(u, c, y, data, True, grad)
        return val, grad.copy()

    def fused_value(u, c, y):
        return K.psi_oracle(u, c, y, data, False, grad)

    def cost(u):
        return K.psi_oracle(u, 0.0, no_y, data, False, grad)

    def cost_grad(u):
        K.psi_oracle(u, 0.0, no_y, data, True, grad)
        return grad.copy()

    def cmap(u):
        out = np.empty(m)
        K.cmap_kernel(u, x0, prm, obs, rad, out, xs, trig)
        return out

    def cmap_jtv(u, w):
        out = np.empty(n)
        K.cmap_jtv_kernel(u, x0, prm, obs, np.asarray(w, float), out, xs, trig)
        return out

    box = BoxSet.tiled(config.u_min, config.u_max, N)
    return ParametricProblem(n, m, cost, cost_grad, cmap, cmap_jtv, box,
                             fused_psi=fused, fused_psi_value=fused_value,
                             jit_psi=(K.psi_oracle, data))


class NmpcController:
    """Stateful wrapper holding the adaptive position weights and solver workspace."""

    def __init__(self, config: ControllerConfig = ControllerConfig()):
        self.config = config
        self.q_p = np.asarray(config.weights.q_p_max, dtype=float)
        self._memory = LBFGSMemory(NU * config.model.horizon, config.solver.lbfgs_memory)

    def reset(self):
        self.q_p = np.asarray(self.config.weights.q_p_max, dtype=float)

    def solve_step(self, x_hat, u_prev, setpoint: Setpoint, obstacles: ObstacleSet | None = None,
                   warm: NmpcSolution | None = None, budget: Budget | None = None) -> NmpcSolution:
        cfg = self.config
        N = cfg.model.horizon
        if obstacles is None:
            obstacles = ObstacleSet.empty(cfg.n_obs, N)
        m = obstacles.n_obs * N
        if warm is not None:
            u0 = warm.shifted_inputs().ravel()
            y0 = warm.shifted_multipliers(obstacles)
        else:
            u0 = np.tile(setpoint.u_ref, N)
            y0 = np.zeros(m)

        problem = build_problem(x_hat, u_prev, setpoint, obstacles, cfg, self.q_p)
        try:
            outcome = alm_solve(problem, u0, y0, cfg.solver, budget=budget, memory=self._memory)
        except NonFiniteOracle:
            log.warning("non-finite oracle value; applying the shifted previous plan")
            u_seq = np.clip(u0.reshape(N, NU), cfg.u_min, cfg.u_max)
            return NmpcSolution(u_seq, rollout(x_hat, u_seq, cfg.model), y0, None,
                                fallback=True, obstacle_ids=list(obstacles.ids))

        u_seq = outcome.u_star.reshape(N, NU)
        self.q_p = adapt_weights(outcome.y_star, cfg.weights, N)
        return NmpcSolution(u_seq, rollout(x_hat, u_seq, cfg.model), outcome.y_star, outcome,
                            obstacle_ids=list(obstacles.ids))


__all__ = [
    "ControllerConfig",
    "NmpcController",
    "NmpcSolution",
    "ObstacleSet",
    "Setpoint",
    "Status",
    "Weights",
    "adapt_weights",
    "build_problem",
    "constraint_jtv",
    "constraint_map",
    "cost_gradient",
    "stage_cost",
    "total_cost",
]
