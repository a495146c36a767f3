"""Obstacle prioritization from shared trajectories.

Every other agent is scored by how close, how fast and how soon its predicted
track comes to the ego track; the ``n_obs`` highest scores become constraint
slots. An agent already inside the ego radius at the current instant gets the
large bonus ``big_m`` so it is always selected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from swarmpc.controller import ObstacleSet
from swarmpc.model import ModelParams, rollout


class StaleTrajectory(RuntimeError):
    """A shared plan is more than one control period old."""


@dataclass
class SharedTrajectory:
    agent_id: int
    measured_state: np.ndarray
    input_seq: np.ndarray
    radius: float = 0.4
    stamp: int = 0


@dataclass(frozen=True)
class PriorityParams:
    d_s: float = 0.2
    a: float = 0.7
    big_m: float = 1e6
    n_obs: int = 3
    horizon: int = 40

    def __post_init__(self):
        if self.d_s <= 0 or self.a <= 0:
            raise ValueError("d_s and a must be positive")
        if self.n_obs < 0 or self.horizon < 1:
            raise ValueError("n_obs must be >= 0 and horizon >= 1")


def predict_track(shared: SharedTrajectory, model: ModelParams = ModelParams(),
                  now: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Positions and velocities, each (N+1, 3), of the sender's predicted motion.

    With ``now`` given, a plan stamped one tick earlier is first advanced by one
    step (first input dropped, last repeated) so index ``j`` lines up with
    ``now + j``; older plans raise :class:`StaleTrajectory`.
    """
    u = np.asarray(shared.input_seq, dtype=float)
    if now is not None:
        age = now - shared.stamp
        if age > 1 or age < 0:
            raise StaleTrajectory(f"agent {shared.agent_id}: plan stamped {shared.stamp}, now {now}")
        if age == 1:
            u = np.vstack([u[1:], u[-1:]])
    xs = rollout(shared.measured_state, u, model)
    return xs[:, 0:3], xs[:, 3:6]


def priority_weights(ego_track, other_tracks, radii, params: PriorityParams) -> np.ndarray:
    """Danger score per candidate.

    ``ego_track`` is an (N+1, 3) position array; ``other_tracks`` is a sequence of
    ``(positions, velocities)`` pairs with the same length.
    """
    ego = np.asarray(ego_track, dtype=float)
    w = np.zeros(len(other_tracks))
    if not len(other_tracks):
        return w
    N = ego.shape[0] - 1
    beta = N / (np.arange(N + 1) + 1.0) ** params.a
    for i, (pos, vel) in enumerate(other_tracks):
        r = float(radii[i])
        d = np.linalg.norm(ego - np.asarray(pos, float), axis=1)
        vm = np.linalg.norm(np.asarray(vel, float), axis=1)
        reach = r + params.d_s
        alpha = np.where(d <= reach, (1.0 - d / reach) ** 2 * vm, 0.0)
        if d[0] <= r:
            w[i] = params.big_m
            alpha[0] = 0.0
        w[i] += float(alpha @ beta)
    return w


def select_obstacles(weights, tracks, radii, params: PriorityParams, ids=None) -> ObstacleSet:
    """Top ``n_obs`` candidates by weight (ties to the smaller id); inactive padding if short.

    ``tracks`` holds (N+1, 3) position arrays, one per candidate.
    """
    weights = np.asarray(weights, dtype=float)
    ids = list(range(len(weights))) if ids is None else list(ids)
    order = sorted(range(len(weights)), key=lambda k: (-weights[k], ids[k]))
    obs = ObstacleSet.empty(params.n_obs, params.horizon)
    for slot, k in enumerate(order[:params.n_obs]):
        obs.set_track(slot, tracks[k], float(radii[k]), ids[k])
    return obs


def prioritize(ego_track, candidates: dict, params: PriorityParams) -> tuple[ObstacleSet, dict]:
    """Score and select in one go. ``candidates`` maps id -> (positions, velocities, radius)."""
    ids = sorted(candidates)
    tracks = [(candidates[i][0], candidates[i][1]) for i in ids]
    radii = [candidates[i][2] for i in ids]
    w = priority_weights(ego_track, tracks, radii, params)
    obs = select_obstacles(w, [t[0] for t in tracks], radii, params, ids)
    return obs, dict(zip(ids, w))
