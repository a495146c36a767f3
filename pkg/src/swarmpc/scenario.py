"""Scenario files (YAML or JSON) and the built-in experiment analogues."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from swarmpc.controller import Weights
from swarmpc.model import ModelParams
from swarmpc.priority import PriorityParams
from swarmpc.solver import AlmSettings
from swarmpc.swarm import EstimatorConfig, NonCooperativeAgent, SimSettings


class ParseError(ValueError):
    """The file is not readable YAML/JSON or has the wrong overall shape."""


class ValidationError(ValueError):
    """A field has a bad value; ``field`` names it."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class AgentSpec:
    ident: int
    start: tuple
    schedule: tuple = ()     # ((time, (x, y, z)), ...); empty means hold the start
    radius: float = 0.4

    def __post_init__(self):
        if not self.schedule:
            object.__setattr__(self, "schedule", ((0.0, tuple(self.start)),))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    agents: tuple = ()
    non_cooperative: tuple = ()
    duration: float = 10.0
    seed: int = 0
    model: ModelParams = ModelParams()
    weights: Weights = Weights()
    solver: AlmSettings = AlmSettings()
    priority: PriorityParams = PriorityParams()
    estimator: EstimatorConfig = EstimatorConfig()
    sim: SimSettings = SimSettings()

    def final_targets(self) -> list:
        return [list(a.schedule[-1][1]) for a in self.agents]


_SECTIONS = {
    "model": ModelParams,
    "weights": Weights,
    "solver": AlmSettings,
    "priority": PriorityParams,
    "estimator": EstimatorConfig,
    "sim": SimSettings,
}
_TOP = {"name", "agents", "non_cooperative", "duration", "seed", *_SECTIONS}


def _tuplify(v):
    if isinstance(v, (list, tuple)):
        return tuple(_tuplify(x) for x in v)
    return v


def _vec3(v, where: str) -> tuple:
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(where, f"expected three numbers, got {v!r}") from None
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValidationError(where, f"expected three finite numbers, got {v!r}")
    return tuple(float(x) for x in arr)


def _section(cls, raw, name: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ValidationError(name, "expected a mapping")
    known = {f.name for f in fields(cls) if not f.name.startswith("_")}
    for key in raw:
        if key not in known:
            raise ValidationError(f"{name}.{key}", "unknown key")
    try:
        return cls(**{k: _tuplify(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ValidationError(name, str(exc)) from None


def _agent(raw, i: int) -> AgentSpec:
    where = f"agents[{i}]"
    if not isinstance(raw, dict):
        raise ValidationError(where, "expected a mapping")
    for key in raw:
        if key not in ("id", "start", "schedule", "radius"):
            raise ValidationError(f"{where}.{key}", "unknown key")
    if "id" not in raw or "start" not in raw:
        raise ValidationError(where, "needs 'id' and 'start'")
    ident = raw["id"]
    if not isinstance(ident, int) or isinstance(ident, bool):
        raise ValidationError(f"{where}.id", "must be an integer")
    start = _vec3(raw["start"], f"{where}.start")
    sched = []
    for j, entry in enumerate(raw.get("schedule") or []):
        w = f"{where}.schedule[{j}]"
        if not isinstance(entry, dict) or set(entry) != {"t", "p"}:
            raise ValidationError(w, "expected {t: time, p: [x, y, z]}")
        t = entry["t"]
        if not isinstance(t, (int, float)) or isinstance(t, bool) or not np.isfinite(t) or t < 0:
            raise ValidationError(f"{w}.t", "must be a finite time >= 0")
        sched.append((float(t), _vec3(entry["p"], f"{w}.p")))
    for j in range(1, len(sched)):
        if sched[j][0] < sched[j - 1][0]:
            raise ValidationError(f"{where}.schedule[{j}].t", "times must be non-decreasing")
    radius = raw.get("radius", 0.4)
    if not isinstance(radius, (int, float)) or radius <= 0:
        raise ValidationError(f"{where}.radius", "must be positive")
    return AgentSpec(ident, start, tuple(sched), float(radius))


def _noncoop(raw, i: int) -> NonCooperativeAgent:
    where = f"non_cooperative[{i}]"
    if not isinstance(raw, dict):
        raise ValidationError(where, "expected a mapping")
    for key in raw:
        if key not in ("id", "waypoints", "radius"):
            raise ValidationError(f"{where}.{key}", "unknown key")
    ident = raw.get("id")
    if not isinstance(ident, int) or isinstance(ident, bool):
        raise ValidationError(f"{where}.id", "must be an integer")
    wps = raw.get("waypoints") or []
    if not wps:
        raise ValidationError(f"{where}.waypoints", "need at least one waypoint")
    times, pos = [], []
    for j, entry in enumerate(wps):
        w = f"{where}.waypoints[{j}]"
        if not isinstance(entry, dict) or set(entry) != {"t", "p"}:
            raise ValidationError(w, "expected {t: time, p: [x, y, z]}")
        times.append(float(entry["t"]))
        pos.append(_vec3(entry["p"], f"{w}.p"))
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValidationError(f"{where}.waypoints", "times must be strictly increasing")
    try:
        return NonCooperativeAgent(ident, tuple(times), tuple(pos), float(raw.get("radius", 0.4)))
    except ValueError as exc:
        raise ValidationError(where, str(exc)) from None


def from_dict(raw) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ParseError("scenario must be a mapping at the top level")
    for key in raw:
        if key not in _TOP:
            raise ValidationError(key, "unknown key")
    agents = raw.get("agents")
    if not isinstance(agents, list) or not agents:
        raise ValidationError("agents", "need a non-empty list of agents")
    specs = tuple(_agent(a, i) for i, a in enumerate(agents))
    ncs = tuple(_noncoop(a, i) for i, a in enumerate(raw.get("non_cooperative") or []))
    ids = [a.ident for a in specs] + [n.ident for n in ncs]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ValidationError("agents.id", f"duplicate ids {dup}")
    duration = raw.get("duration", 10.0)
    if not isinstance(duration, (int, float)) or isinstance(duration, bool) or duration < 0:
        raise ValidationError("duration", "must be a number >= 0")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError("seed", "must be a non-negative integer")
    sections = {k: _section(cls, raw.get(k), k) for k, cls in _SECTIONS.items()}
    cfg = ScenarioConfig(name=str(raw.get("name", "custom")), agents=specs, non_cooperative=ncs,
                         duration=float(duration), seed=seed, **sections)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig):
    """Cross-field checks; raises :class:`ValidationError`."""
    rmax = max(a.radius for a in cfg.agents)
    for i, a in enumerate(cfg.agents):
        for j in range(i + 1, len(cfg.agents)):
            b = cfg.agents[j]
            d = float(np.linalg.norm(np.subtract(a.start, b.start)))
            if d < rmax:
                raise ValidationError(f"agents[{j}].start",
                                      f"overlaps agent {a.ident} ({d:.3f} m < {rmax} m)")
    ratio = cfg.model.dt / cfg.sim.plant_dt
    if abs(ratio - round(ratio)) > 1e-9:
        raise ValidationError("sim.plant_dt", "must divide model.dt")


def to_dict(cfg: ScenarioConfig) -> dict:
    def section(obj, default):
        return {f.name: _listify(getattr(obj, f.name)) for f in fields(obj)
                if getattr(obj, f.name) != getattr(default, f.name)}

    out = {"name": cfg.name, "duration": cfg.duration, "seed": cfg.seed, "agents": [
        {"id": a.ident, "start": list(a.start), "radius": a.radius,
         "schedule": [{"t": t, "p": list(p)} for t, p in a.schedule]} for a in cfg.agents]}
    if cfg.non_cooperative:
        out["non_cooperative"] = [
            {"id": n.ident, "radius": n.radius,
             "waypoints": [{"t": t, "p": list(p)} for t, p in zip(n.times, n.positions)]}
            for n in cfg.non_cooperative]
    for key, cls in _SECTIONS.items():
        sec = section(getattr(cfg, key), cls())
        if sec:
            out[key] = sec
    return out


def _listify(v):
    if isinstance(v, tuple):
        return [_listify(x) for x in v]
    return v


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return from_dict(raw)


def dump_scenario(cfg: ScenarioConfig, path):
    Path(path).write_text(json.dumps(to_dict(cfg), indent=2) + "\n")


# --- built-ins -----------------------------------------------------------------------------

Z = 1.0


def _spec(i, start, moves=()):
    sched = ((0.0, tuple(map(float, start))),) + tuple((float(t), tuple(map(float, p))) for t, p in moves)
    return AgentSpec(i, tuple(map(float, start)), sched)


def head_on() -> ScenarioConfig:
    """Two agents 3 m apart swap positions along the same line."""
    a = (-1.5, 0.05, Z)
    b = (1.5, -0.05, Z)
    return ScenarioConfig(name="head-on", duration=12.0,
                          agents=(_spec(0, a, [(0.0, b)]), _spec(1, b, [(0.0, a)])))


def formation_swap(period: float = 5.0, moves: int = 12, draw_seed: int = 0) -> ScenarioConfig:
    """Nine agents in a 2 x 5 slot grid; every ``period`` s one agent flies into the free slot.

    Movers are drawn from a fixed-seed generator (never the previous mover), so the
    schedule is part of the scenario rather than of the run seed.
    """
    slots = [np.array([x, y, Z]) for y in (-0.5, 0.5) for x in (-2.0, -1.0, 0.0, 1.0, 2.0)]
    rng = np.random.default_rng(draw_seed)
    occupant = {s: s for s in range(9)}        # agent -> slot
    hole = 9
    last = None
    schedules = {i: [] for i in range(9)}
    for m in range(moves):
        mover = int(rng.choice([i for i in range(9) if i != last]))
        schedules[mover].append((m * period, slots[hole]))
        occupant[mover], hole = hole, occupant[mover]
        last = mover
    agents = tuple(_spec(i, slots[i], schedules[i]) for i in range(9))
    return ScenarioConfig(name="formation-swap", duration=period * moves, agents=agents)


def team_swap(swap_back: float = 10.0, duration: float = 20.0) -> ScenarioConfig:
    """Two lines of five, 5 m apart, swap sides and then swap back."""
    agents = []
    for k in range(5):
        a = (-2.5, -2.0 + k, Z)
        b = (2.5, -1.9 + k, Z)
        agents.append(_spec(k, a, [(0.0, (2.5, a[1], Z)), (swap_back, a)]))
        agents.append(_spec(5 + k, b, [(0.0, (-2.5, b[1], Z)), (swap_back, b)]))
    agents.sort(key=lambda s: s.ident)
    return ScenarioConfig(name="team-swap", duration=duration, agents=tuple(agents))


def intruder(speed: float = 1.0, duration: float = 12.0) -> ScenarioConfig:
    """Eight hovering agents in a 2 x 4 grid; a scripted body flies straight along one row."""
    agents = tuple(_spec(i, (-1.5 + (i % 4), -0.5 + (i // 4), Z)) for i in range(8))
    y = 0.45
    t_end = 8.0 / speed
    nc = NonCooperativeAgent(100, (1.0, 1.0 + t_end), ((-4.0, y, Z), (4.0, y, Z)), 0.4)
    return ScenarioConfig(name="intruder", duration=duration, agents=agents, non_cooperative=(nc,))


BUILTINS = {
    "head-on": head_on,
    "formation-swap": formation_swap,
    "team-swap": team_swap,
    "intruder": intruder,
}


def builtin(name: str) -> ScenarioConfig:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown built-in scenario {name!r}; choose from {sorted(BUILTINS)}") from None


def resolve(ref: str) -> ScenarioConfig:
    """A built-in name or a path to a scenario file."""
    if ref in BUILTINS:
        return builtin(ref)
    return load_scenario(ref)


def with_overrides(cfg: ScenarioConfig, seed=None, duration=None) -> ScenarioConfig:
    kw = {}
    if seed is not None:
        kw["seed"] = int(seed)
    if duration is not None:
        kw["duration"] = float(duration)
    return replace(cfg, **kw) if kw else cfg


__all__ = [
    "AgentSpec",
    "BUILTINS",
    "ParseError",
    "ScenarioConfig",
    "ValidationError",
    "builtin",
    "dump_scenario",
    "from_dict",
    "load_scenario",
    "resolve",
    "to_dict",
    "validate",
    "with_overrides",
]
