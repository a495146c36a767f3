"""Deterministic multi-agent runtime.

Each control tick: estimate states, read last tick's broadcasts, prioritize,
solve every agent's NMPC, integrate the plant at a finer step, then post the
new plans. Cross-agent reads only touch the previous-tick bus snapshot, so the
solves may run in any order or in parallel without changing the result.
"""

from __future__ import annotations

import gc
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from swarmpc.controller import ControllerConfig, NmpcController, NmpcSolution, Setpoint
from swarmpc.model import NU, NX, ModelParams, _deriv, _step, rollout
from swarmpc.priority import (
    PriorityParams,
    SharedTrajectory,
    StaleTrajectory,
    predict_track,
    prioritize,
)
from swarmpc.solver import AlmSettings, Status

log = logging.getLogger(__name__)


class ScenarioInvalid(ValueError):
    """The initial configuration cannot be simulated (e.g. overlapping agents)."""


@dataclass(frozen=True)
class EstimatorConfig:
    noise_std: float = 0.0
    window: int = 3
    outlier_threshold: float = 5.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.outlier_threshold <= 0:
            raise ValueError("outlier_threshold must be positive")


@dataclass(frozen=True)
class SimSettings:
    plant_dt: float = 0.005
    # "iterations": fixed inner-iteration cap, reproducible logs; "wallclock": time_budget cap
    budget_mode: str = "iterations"
    max_inner_iters: int = 2000
    integrator: str = "rk4"
    workers: int = 1

    def __post_init__(self):
        if self.plant_dt <= 0:
            raise ValueError("plant_dt must be positive")
        if self.budget_mode not in ("iterations", "wallclock"):
            raise ValueError("budget_mode must be 'iterations' or 'wallclock'")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be >= 1")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError("integrator must be 'rk4' or 'euler'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def solver_settings(self, base: AlmSettings) -> AlmSettings:
        from dataclasses import replace
        if self.budget_mode == "iterations":
            return replace(base, time_budget=None, max_inner_iters=self.max_inner_iters)
        return replace(base, max_inner_iters=None)


# --- estimation ----------------------------------------------------------------

def constant_velocity_predict(p, v, N: int, dt: float) -> np.ndarray:
    """Positions ``p + j dt v`` for ``j = 0..N``."""
    j = np.arange(N + 1)[:, None]
    return np.asarray(p, float)[None, :] + j * dt * np.asarray(v, float)[None, :]


def estimate_state(samples, dt: float, config: EstimatorConfig = EstimatorConfig(),
                   prev_velocity=None) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity from uniformly spaced position samples (oldest first).

    Velocity is the componentwise median of the last ``window`` finite differences.
    Components above ``outlier_threshold`` in magnitude keep ``prev_velocity``.
    Fewer than three samples give zero velocity.
    """
    s = np.asarray(samples, dtype=float)
    p = s[-1].copy()
    prev = np.zeros(3) if prev_velocity is None else np.asarray(prev_velocity, float)
    if s.shape[0] < 3:
        return p, np.zeros(3)
    diffs = np.diff(s[-(config.window + 1):], axis=0) / dt
    v = np.median(diffs, axis=0)
    bad = ~np.isfinite(v) | (np.abs(v) > config.outlier_threshold)
    v[bad] = prev[bad]
    return p, v


class _Tracker:
    """Sliding window of measured positions for one body."""

    def __init__(self, p0, dt: float, config: EstimatorConfig):
        self.dt = dt
        self.config = config
        # seeded with the start position so the first estimate is at rest
        self.buf = np.tile(np.asarray(p0, float), (config.window + 1, 1))
        self.v = np.zeros(3)

    def push(self, p):
        self.buf[:-1] = self.buf[1:]
        self.buf[-1] = p

    def estimate(self):
        p, self.v = estimate_state(self.buf, self.dt, self.config, self.v)
        return p, self.v.copy()


# --- non-cooperative agents ------------------------------------------------------

@dataclass(frozen=True)
class NonCooperativeAgent:
    """Scripted body following a piecewise-linear waypoint path; exposes only (p, v)."""

    ident: int
    times: tuple
    positions: tuple
    radius: float = 0.4

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if t.ndim != 1 or len(t) < 1 or len(self.positions) != len(t):
            raise ValueError("need one position per waypoint time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("waypoint times must be strictly increasing")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")

    def position(self, t: float) -> np.ndarray:
        ts = np.asarray(self.times, float)
        ps = np.asarray(self.positions, float)
        return np.array([np.interp(t, ts, ps[:, k]) for k in range(3)])

    def velocity(self, t: float) -> np.ndarray:
        ts = np.asarray(self.times, float)
        ps = np.asarray(self.positions, float)
        if len(ts) < 2 or t < ts[0] or t >= ts[-1]:
            return np.zeros(3)
        i = int(np.searchsorted(ts, t, side="right")) - 1
        return (ps[i + 1] - ps[i]) / (ts[i + 1] - ts[i])


# --- plant ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _plant_advance(X, U, prm, h, nsub, rk4, P):
    """Integrate every agent over ``nsub`` substeps with held inputs; P[s] = positions after substep s."""
    n = X.shape[0]
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    nxt = np.empty(8)
    eprm = prm.copy()
    eprm[8] = h
    for s in range(nsub):
        for a in range(n):
            x = X[a]
            u = U[a]
            if rk4:
                _deriv(x, u, prm, k1)
                for i in range(8):
                    tmp[i] = x[i] + 0.5 * h * k1[i]
                _deriv(tmp, u, prm, k2)
                for i in range(8):
                    tmp[i] = x[i] + 0.5 * h * k2[i]
                _deriv(tmp, u, prm, k3)
                for i in range(8):
                    tmp[i] = x[i] + h * k3[i]
                _deriv(tmp, u, prm, k4)
                for i in range(8):
                    x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            else:
                _step(x, u, eprm, nxt)
                for i in range(8):
                    x[i] = nxt[i]
            for i in range(3):
                P[s, a, i] = x[i]


def _min_pairwise(P) -> float:
    """Smallest distance between distinct rows of P (n, 3); inf for n < 2."""
    n = P.shape[0]
    if n < 2:
        return np.inf
    d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    return float(d[np.triu_indices(n, 1)].min())


def _min_cross(P, Q) -> float:
    if P.shape[0] == 0 or Q.shape[0] == 0:
        return np.inf
    return float(np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=-1).min())


# --- world -------------------------------------------------------------------------------

@dataclass
class AgentState:
    ident: int
    x: np.ndarray
    controller: NmpcController
    schedule: list          # [(time, target position)], non-decreasing times
    radius: float
    u_prev: np.ndarray
    tracker: _Tracker
    plan: NmpcSolution | None = None

    def setpoint(self, t: float, model: ModelParams) -> Setpoint:
        target = self.schedule[0][1]
        for ts, p in self.schedule:
            if ts <= t + 1e-9:
                target = p
        return Setpoint.hover_at(target, model)


@dataclass
class TickRecord:
    states: np.ndarray          # (n, 8) after the tick
    inputs: np.ndarray          # (n, 3) applied during the tick
    solve_time: np.ndarray
    fpr: np.ndarray
    infeasibility: np.ndarray
    y_norm: np.ndarray
    inner_iters: np.ndarray
    outer_iters: np.ndarray
    converged: np.ndarray
    fallback: np.ndarray
    selected: np.ndarray        # (n, n_obs) obstacle ids, -1 for padding
    min_dist: float
    min_dist_nc: float
    nc_positions: np.ndarray


@dataclass
class RunLog:
    """Per-tick arrays; ticks are rows ``0..K`` (row 0 is the initial state)."""

    agent_ids: list
    nc_ids: list
    control_dt: float
    budget: float
    states: np.ndarray          # (K+1, n, 8)
    inputs: np.ndarray          # (K+1, n, 3); last row NaN
    solve_time: np.ndarray      # (K+1, n); last row NaN
    fpr: np.ndarray
    infeasibility: np.ndarray
    y_norm: np.ndarray
    inner_iters: np.ndarray
    outer_iters: np.ndarray
    converged: np.ndarray
    fallback: np.ndarray
    selected: np.ndarray        # (K+1, n, n_obs)
    min_dist: np.ndarray        # (K+1,) cooperative pairs, min over the preceding interval
    min_dist_nc: np.ndarray     # (K+1,) cooperative agent vs non-cooperative body
    nc_positions: np.ndarray    # (K+1, n_nc, 3)
    meta: dict = field(default_factory=dict)

    @property
    def n_ticks(self) -> int:
        return self.states.shape[0]


class SimWorld:
    """Mutable world advanced one control period per :meth:`tick`."""

    def __init__(self, agents: list[AgentState], non_cooperative: list[NonCooperativeAgent],
                 model: ModelParams, priority: PriorityParams, estimator: EstimatorConfig,
                 sim: SimSettings, seed: int = 0):
        self.agents = agents
        self.non_cooperative = non_cooperative
        self.model = model
        self.priority = priority
        self.estimator = estimator
        self.sim = sim
        self.control_dt = model.dt
        ratio = self.control_dt / sim.plant_dt
        self.nsub = int(round(ratio))
        if self.nsub < 1 or abs(ratio - self.nsub) > 1e-9:
            raise ScenarioInvalid("control_dt must be an integer multiple of plant_dt")
        self.rng = np.random.default_rng(seed)
        self.bus: dict[int, tuple[np.ndarray, int]] = {}
        self.tick_index = 0
        self.nc_trackers = [_Tracker(nc.position(0.0), sim.plant_dt, estimator)
                            for nc in non_cooperative]
        self._pool = ThreadPoolExecutor(sim.workers) if sim.workers > 1 else None

    @property
    def time(self) -> float:
        return self.tick_index * self.control_dt

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _measure(self, p):
        if self.estimator.noise_std > 0:
            return p + self.rng.normal(0.0, self.estimator.noise_std, 3)
        return p.copy()

    def _estimates(self):
        xh = []
        for ag in self.agents:
            p, v = ag.tracker.estimate()
            x = ag.x.copy()
            x[0:3] = p
            x[3:6] = v
            xh.append(x)
        nc = [tr.estimate() for tr in self.nc_trackers]
        return xh, nc

    def _candidates(self, xh, nc_est):
        """Predicted (positions, velocities, radius) of every body, keyed by id."""
        N = self.model.horizon
        dt = self.control_dt
        out = {}
        for ag, x in zip(self.agents, xh):
            entry = self.bus.get(ag.ident)
            track = None
            if entry is not None:
                useq, stamp = entry
                shared = SharedTrajectory(ag.ident, x, useq, ag.radius, stamp)
                try:
                    track = predict_track(shared, self.model, now=self.tick_index)
                except StaleTrajectory:
                    track = None
            if track is None:
                pos = constant_velocity_predict(x[0:3], x[3:6], N, dt)
                track = (pos, np.tile(x[3:6], (N + 1, 1)))
            out[ag.ident] = (track[0], track[1], ag.radius)
        for nc, (p, v) in zip(self.non_cooperative, nc_est):
            out[nc.ident] = (constant_velocity_predict(p, v, N, dt), np.tile(v, (N + 1, 1)), nc.radius)
        return out

    def _solve_one(self, a, xh, cands, t):
        ag = self.agents[a]
        model = self.model
        setpoint = ag.setpoint(t, model)
        if ag.plan is not None:
            ego_u = ag.plan.shifted_inputs()
        else:
            ego_u = np.tile(setpoint.u_ref, (model.horizon, 1))
        ego_track = rollout(xh[a], ego_u, model)[:, 0:3]
        others = {k: v for k, v in cands.items() if k != ag.ident}
        obstacles, _ = prioritize(ego_track, others, self.priority)
        sol = ag.controller.solve_step(xh[a], ag.u_prev, setpoint, obstacles, warm=ag.plan)
        return sol, obstacles

    def tick(self) -> TickRecord:
        k = self.tick_index
        t = self.time
        xh, nc_est = self._estimates()
        cands = self._candidates(xh, nc_est)
        idx = range(len(self.agents))
        if self._pool is not None:
            results = list(self._pool.map(lambda a: self._solve_one(a, xh, cands, t), idx))
        else:
            results = [self._solve_one(a, xh, cands, t) for a in idx]

        n = len(self.agents)
        n_obs = self.priority.n_obs
        rec = dict(
            solve_time=np.zeros(n), fpr=np.zeros(n), infeasibility=np.zeros(n), y_norm=np.zeros(n),
            inner_iters=np.zeros(n, dtype=int), outer_iters=np.zeros(n, dtype=int),
            converged=np.zeros(n, dtype=bool), fallback=np.zeros(n, dtype=bool),
            selected=np.full((n, n_obs), -1, dtype=int),
        )
        U = np.empty((n, NU))
        for a, (sol, obstacles) in enumerate(results):
            ag = self.agents[a]
            U[a] = sol.applied_input
            ag.u_prev = U[a].copy()
            ag.plan = sol
            oc = sol.outcome
            if oc is not None:
                rec["solve_time"][a] = oc.solve_time
                rec["fpr"][a] = oc.fpr_norm
                rec["infeasibility"][a] = oc.infeasibility
                rec["inner_iters"][a] = oc.inner_iters_total
                rec["outer_iters"][a] = oc.outer_iters
                rec["converged"][a] = oc.status is Status.CONVERGED
            else:
                rec["solve_time"][a] = np.nan
                rec["fpr"][a] = np.nan
                rec["infeasibility"][a] = np.nan
            rec["fallback"][a] = sol.fallback
            rec["y_norm"][a] = float(np.linalg.norm(sol.y_star))
            for s, ident in enumerate(obstacles.ids):
                if obstacles.active[s] and ident is not None:
                    rec["selected"][a, s] = ident

        # plant
        X = np.array([ag.x for ag in self.agents])
        P = np.empty((self.nsub, n, 3))
        _plant_advance(X, U, self.model.packed(), self.sim.plant_dt, self.nsub,
                       self.sim.integrator == "rk4", P)
        min_d = np.inf
        min_nc = np.inf
        nc_pos = np.zeros((len(self.non_cooperative), 3))
        for s in range(self.nsub):
            ts = t + (s + 1) * self.sim.plant_dt
            nc_pos = np.array([nc.position(ts) for nc in self.non_cooperative]).reshape(-1, 3)
            min_d = min(min_d, _min_pairwise(P[s]))
            min_nc = min(min_nc, _min_cross(P[s], nc_pos))
            for a, ag in enumerate(self.agents):
                ag.tracker.push(self._measure(P[s, a]))
            for tr, p in zip(self.nc_trackers, nc_pos):
                tr.push(self._measure(p))
        for a, ag in enumerate(self.agents):
            ag.x = X[a].copy()
            if not np.all(np.isfinite(ag.x)):
                raise FloatingPointError(f"agent {ag.ident} state diverged at tick {k}")

        # post plans; consumers see them next tick
        self.bus = {ag.ident: (ag.plan.u_seq.copy(), k) for ag in self.agents}
        self.tick_index += 1
        return TickRecord(states=X.copy(), inputs=U, min_dist=min_d, min_dist_nc=min_nc,
                          nc_positions=nc_pos, **rec)


def check_initial(positions, radii):
    """Raise :class:`ScenarioInvalid` if two start positions are closer than the largest radius."""
    P = np.asarray(positions, float).reshape(-1, 3)
    rmax = max(radii) if len(radii) else 0.0
    for i in range(len(P)):
        for j in range(i + 1, len(P)):
            if np.linalg.norm(P[i] - P[j]) < rmax:
                raise ScenarioInvalid(f"agents {i} and {j} start {np.linalg.norm(P[i] - P[j]):.3f} m apart")


def warmup(config: ControllerConfig):
    """One throwaway solve so JIT compilation is not billed to the first logged solve."""
    x0 = np.zeros(NX)
    NmpcController(config).solve_step(x0, config.model.hover_input(), Setpoint.hover_at(x0[0:3], config.model))
    # the compiler leaves a large heap; freezing it keeps later collections out of the solve timings
    gc.collect()
    gc.freeze()


def build_world(scenario) -> SimWorld:
    """World from a :class:`swarmpc.scenario.ScenarioConfig`."""
    sim = scenario.sim
    model = scenario.model
    solver = sim.solver_settings(scenario.solver)
    ccfg = ControllerConfig(model=model, weights=scenario.weights, solver=solver,
                            n_obs=scenario.priority.n_obs)
    prio = scenario.priority
    if prio.horizon != model.horizon:
        from dataclasses import replace
        prio = replace(prio, horizon=model.horizon)
    agents = []
    for spec in scenario.agents:
        x0 = np.zeros(NX)
        x0[0:3] = spec.start
        sched = [(float(t), np.asarray(p, float)) for t, p in spec.schedule]
        agents.append(AgentState(spec.ident, x0, NmpcController(ccfg), sched, spec.radius,
                                 model.hover_input().copy(),
                                 _Tracker(x0[0:3], sim.plant_dt, scenario.estimator)))
    check_initial([a.x[0:3] for a in agents], [a.radius for a in agents])
    warmup(ccfg)
    return SimWorld(agents, list(scenario.non_cooperative), model, prio, scenario.estimator,
                    sim, scenario.seed)


def simulate(scenario, duration: float | None = None, progress=None) -> RunLog:
    """Run a scenario for its duration (or ``duration`` seconds) and collect the log."""
    world = build_world(scenario)
    T = scenario.duration if duration is None else duration
    K = int(round(T / world.control_dt))
    n = len(world.agents)
    n_nc = len(world.non_cooperative)
    n_obs = world.priority.n_obs
    states = np.empty((K + 1, n, NX))
    states[0] = [ag.x for ag in world.agents]
    nanf = lambda *s: np.full((K + 1, *s), np.nan)
    inputs = nanf(n, NU)
    solve_time, fpr, infeas, ynorm = nanf(n), nanf(n), nanf(n), nanf(n)
    inner = np.zeros((K + 1, n), dtype=int)
    outer = np.zeros((K + 1, n), dtype=int)
    conv = np.zeros((K + 1, n), dtype=bool)
    fb = np.zeros((K + 1, n), dtype=bool)
    selected = np.full((K + 1, n, n_obs), -1, dtype=int)
    P0 = states[0, :, 0:3]
    nc0 = np.array([nc.position(0.0) for nc in world.non_cooperative]).reshape(-1, 3)
    min_d = np.empty(K + 1)
    min_nc = np.empty(K + 1)
    min_d[0] = _min_pairwise(P0)
    min_nc[0] = _min_cross(P0, nc0)
    nc_positions = np.empty((K + 1, n_nc, 3))
    nc_positions[0] = nc0
    try:
        for k in range(K):
            r = world.tick()
            states[k + 1] = r.states
            inputs[k] = r.inputs
            solve_time[k], fpr[k], infeas[k], ynorm[k] = r.solve_time, r.fpr, r.infeasibility, r.y_norm
            inner[k], outer[k], conv[k], fb[k] = r.inner_iters, r.outer_iters, r.converged, r.fallback
            selected[k] = r.selected
            min_d[k + 1] = r.min_dist
            min_nc[k + 1] = r.min_dist_nc
            nc_positions[k + 1] = r.nc_positions
            if progress is not None:
                progress(k + 1, K)
    finally:
        world.close()
    budget = scenario.solver.time_budget or 0.04
    return RunLog(
        agent_ids=[ag.ident for ag in world.agents],
        nc_ids=[nc.ident for nc in world.non_cooperative],
        control_dt=world.control_dt, budget=budget, states=states, inputs=inputs,
        solve_time=solve_time, fpr=fpr, infeasibility=infeas, y_norm=ynorm, inner_iters=inner,
        outer_iters=outer, converged=conv, fallback=fb, selected=selected, min_dist=min_d,
        min_dist_nc=min_nc, nc_positions=nc_positions,
        meta={"name": scenario.name, "seed": scenario.seed, "duration": K * world.control_dt,
              "n_obs": n_obs, "targets": [list(map(float, a.schedule[-1][1])) for a in scenario.agents]},
    )


__all__ = [
    "EstimatorConfig",
    "NonCooperativeAgent",
    "RunLog",
    "ScenarioInvalid",
    "SimSettings",
    "SimWorld",
    "build_world",
    "constant_velocity_predict",
    "estimate_state",
    "simulate",
]
