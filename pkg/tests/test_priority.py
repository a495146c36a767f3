import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmpc.model import ModelParams, hover_state, rollout
from swarmpc.priority import (
    PriorityParams,
    SharedTrajectory,
    StaleTrajectory,
    predict_track,
    prioritize,
    priority_weights,
    select_obstacles,
)

PP = PriorityParams()
N = 40


def brute_weights(ego, tracks, radii, d_s, a, big_m):
    """Plain double loop over agents and horizon steps."""
    n = len(ego) - 1
    out = []
    for (pos, vel), r in zip(tracks, radii):
        w = 0.0
        for j in range(n + 1):
            d = math.dist(ego[j], pos[j])
            vm = math.sqrt(sum(c * c for c in vel[j]))
            if d <= r and j == 0:
                w += big_m
            elif d <= r + d_s:
                w += (1 - d / (r + d_s)) ** 2 * vm * n / (j + 1) ** a
        out.append(w)
    return out


def brute_top_k(weights, ids, k):
    chosen = []
    remaining = list(zip(weights, ids))
    for _ in range(min(k, len(remaining))):
        best = remaining[0]
        for cand in remaining[1:]:
            if cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
                best = cand
        chosen.append(best[1])
        remaining.remove(best)
    return chosen


def static(p, n=N):
    return np.tile(np.asarray(p, float), (n + 1, 1)), np.zeros((n + 1, 3))


def moving(p, v, n=N, dt=0.05):
    p, v = np.asarray(p, float), np.asarray(v, float)
    return p + np.arange(n + 1)[:, None] * dt * v, np.tile(v, (n + 1, 1))


def random_config(rng, n_agents):
    """Agents jittered around a small volume so that scores are varied and often overlap."""
    model = ModelParams()
    tracks = []
    for _ in range(n_agents):
        x0 = np.concatenate([rng.uniform(-1, 1, 2), [1.0 + rng.uniform(-0.3, 0.3)],
                             rng.uniform(-1.5, 1.5, 3), rng.uniform(-0.2, 0.2, 2)])
        u = np.column_stack([rng.uniform(8, 11.5, N), rng.uniform(-0.25, 0.25, (N, 2))])
        xs = rollout(x0, u, model)
        tracks.append((xs[:, 0:3], xs[:, 3:6]))
    radii = rng.choice([0.3, 0.4, 0.5], n_agents)
    return tracks, radii


class TestPredictTrack:
    def test_hover(self):
        s = SharedTrajectory(1, hover_state((1, 2, 3)), np.tile([9.81, 0, 0], (N, 1)))
        pos, vel = predict_track(s)
        assert pos.shape == (41, 3) and np.all(pos == [1, 2, 3]) and np.all(vel == 0)

    def test_is_rollout(self, rng):
        x0 = rng.normal(size=8) * 0.3
        u = np.column_stack([rng.uniform(6, 12, N), rng.uniform(-0.2, 0.2, (N, 2))])
        pos, vel = predict_track(SharedTrajectory(0, x0, u))
        xs = rollout(x0, u, ModelParams())
        np.testing.assert_array_equal(pos, xs[:, 0:3])
        np.testing.assert_array_equal(vel, xs[:, 3:6])

    def test_tilt_three_steps(self):
        # hand-rolled Euler: tau = 0.5, dt = 0.05, T = 10, pitch ref 0.2
        model = ModelParams(horizon=3)
        u = np.tile([10.0, 0.0, 0.2], (3, 1))
        pos, vel = predict_track(SharedTrajectory(0, np.zeros(8), u), model)
        dt, g = 0.05, 9.81
        p, v, th = np.zeros(3), np.zeros(3), 0.0
        for _ in range(3):
            acc = np.array([10.0 * math.sin(th), 0.0, 10.0 * math.cos(th) - g]) - np.array([0.1, 0.1, 0.2]) * v
            p, v, th = p + dt * v, v + dt * acc, th + dt * (0.2 - th) / 0.5
        np.testing.assert_allclose(pos[3], p, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(vel[3], v, rtol=1e-13, atol=1e-15)
        assert pos[3, 0] > 0 and vel[3, 0] > vel[2, 0] > 0

    def test_one_tick_old_is_shifted(self, rng):
        x0 = rng.normal(size=8) * 0.3
        u = np.column_stack([rng.uniform(6, 12, N), rng.uniform(-0.2, 0.2, (N, 2))])
        s = SharedTrajectory(0, x0, u, stamp=4)
        pos, _ = predict_track(s, now=5)
        np.testing.assert_array_equal(pos, rollout(x0, np.vstack([u[1:], u[-1:]]), ModelParams())[:, 0:3])
        np.testing.assert_array_equal(predict_track(s, now=4)[0], rollout(x0, u, ModelParams())[:, 0:3])

    @pytest.mark.parametrize("now", [6, 3])
    def test_stale_raises(self, now):
        s = SharedTrajectory(0, np.zeros(8), np.tile([9.81, 0, 0], (N, 1)), stamp=4)
        with pytest.raises(StaleTrajectory):
            predict_track(s, now=now)


class TestWeights:
    def test_far_all_zero(self):
        ego, _ = static((0, 0, 1))
        tracks = [moving((3, 0, 1), (0, 1, 0)), moving((-2, 2, 1), (1, 0, 0))]
        assert np.all(priority_weights(ego, tracks, [0.4, 0.4], PP) == 0.0)

    def test_overlap_gets_big_m(self):
        ego, _ = static((0, 0, 1))
        near = moving((0.3, 0, 1), (0, 0, 0))
        # fast and close for the whole horizon, but never inside the radius
        fast = moving((0.45, 0, 1), (0, 0, 0))
        fast = (fast[0], np.full((N + 1, 3), 5.0))
        w = priority_weights(ego, [near, fast], [0.4, 0.4], PP)
        assert w[0] >= PP.big_m and w[1] > 0 and w[0] > w[1]

    def test_two_intruders_against_brute_force(self):
        ego, _ = static((0, 0, 1))
        d_half = 0.4 + PP.d_s / 2
        slow = (np.tile([d_half, 0, 1], (N + 1, 1)), np.tile([0.2, 0, 0], (N + 1, 1)))
        fast_pos = np.tile([3.0, 0, 1], (N + 1, 1))
        fast_pos[N] = [0.1 + 0.4, 0, 1]
        fast = (fast_pos, np.tile([4.0, 0, 0], (N + 1, 1)))
        w = priority_weights(ego, [slow, fast], [0.4, 0.4], PP)
        ref = brute_weights(ego, [slow, fast], [0.4, 0.4], PP.d_s, PP.a, PP.big_m)
        np.testing.assert_allclose(w, ref, rtol=1e-12)
        # hand value for the slow one: (1/6)^2 * 0.2 * sum_j 40 / (j+1)^0.7
        beta = sum(40 / (j + 1) ** 0.7 for j in range(N + 1))
        assert w[0] == pytest.approx(0.2 * beta / 36, rel=1e-12)
        assert (w[0] > w[1]) == (ref[0] > ref[1])

    def test_zero_velocity_not_scored(self):
        ego, _ = static((0, 0, 1))
        assert priority_weights(ego, [static((0.5, 0, 1))], [0.4], PP)[0] == 0.0

    @given(st.integers(0, 2**31 - 1), st.floats(1.01, 10.0))
    def test_velocity_scaling(self, seed, s):
        rng = np.random.default_rng(seed)
        tracks, radii = random_config(rng, 4)
        ego = tracks[0][0]
        others = tracks[1:]
        w = priority_weights(ego, others, radii[1:], PP)
        scaled = [others[0]] + [(p, s * v) for p, v in others[1:]]
        ws = priority_weights(ego, scaled, radii[1:], PP)
        assert ws[0] == w[0]
        # only the non-M part scales
        base = np.where(w >= PP.big_m, w - PP.big_m, w)
        base_s = np.where(ws >= PP.big_m, ws - PP.big_m, ws)
        np.testing.assert_allclose(base_s[1:], s * base[1:], rtol=1e-10, atol=1e-12)

    @given(st.integers(0, 2**31 - 1), st.permutations(range(5)))
    def test_permutation_equivariant(self, seed, perm):
        rng = np.random.default_rng(seed)
        tracks, radii = random_config(rng, 6)
        ego, others, rr = tracks[0][0], tracks[1:], radii[1:]
        w = priority_weights(ego, others, rr, PP)
        wp = priority_weights(ego, [others[k] for k in perm], [rr[k] for k in perm], PP)
        np.testing.assert_array_equal(wp, w[list(perm)])


class TestSelect:
    def test_padding(self):
        tracks = [static((1, 0, 1))[0], static((2, 0, 1))[0]]
        obs = select_obstacles([1.0, 2.0], tracks, [0.4, 0.3], PP, ids=[4, 7])
        assert obs.n_obs == 3 and list(obs.active) == [True, True, False]
        assert obs.ids[:2] == [7, 4]
        np.testing.assert_array_equal(obs.radii[:2], [0.3, 0.4])
        assert obs.centers[2, 0, 2] <= -1000

    def test_big_m_ordering(self):
        tracks = [static((k, 0, 1))[0] for k in range(3)]
        obs = select_obstacles([5.0, PP.big_m + 1, 0.2], tracks, [0.4] * 3,
                               PriorityParams(n_obs=2), ids=[1, 2, 3])
        assert obs.ids == [2, 1]
        np.testing.assert_array_equal(obs.centers[0], tracks[1])

    def test_ties_by_id(self):
        tracks = [static((k, 0, 1))[0] for k in range(4)]
        obs = select_obstacles([1.0, 2.0, 1.0, 1.0], tracks, [0.4] * 4, PP, ids=[9, 5, 3, 6])
        assert obs.ids == [5, 3, 6]

    def test_random_top_k(self, rng):
        for _ in range(50):
            w = rng.integers(0, 5, 9).astype(float)  # many ties
            ids = list(rng.permutation(20)[:9])
            tracks = [static((k, 0, 1))[0] for k in range(9)]
            obs = select_obstacles(w, tracks, [0.4] * 9, PP, ids=ids)
            assert obs.ids == brute_top_k(list(w), ids, 3)

    def test_no_candidates(self):
        obs = select_obstacles([], [], [], PP)
        assert not obs.active.any()

    def test_prioritize_dict(self):
        ego, _ = static((0, 0, 1))
        cands = {3: (*moving((0.5, 0, 1), (0.5, 0, 0)), 0.4), 1: (*static((5, 0, 1)), 0.4)}
        obs, w = prioritize(ego, cands, PP)
        assert obs.ids[0] == 3 and obs.ids[1] == 1 and w[1] == 0.0 and w[3] > 0


def check_configuration(rng, params):
    """One randomized round of the oracle comparison; returns (matches, m_dominance_ok)."""
    n_agents = int(rng.integers(2, 13))
    tracks, radii = random_config(rng, n_agents)
    ego = tracks[0][0]
    others, rr = tracks[1:], radii[1:]
    ids = [int(i) for i in rng.permutation(50)[: n_agents - 1]]
    w = priority_weights(ego, others, rr, params)
    obs = select_obstacles(w, [t[0] for t in others], rr, params, ids)
    ref_w = brute_weights(ego, others, rr, params.d_s, params.a, params.big_m)
    chosen = brute_top_k(ref_w, ids, params.n_obs)
    ok = obs.ids[: len(chosen)] == chosen and np.allclose(w, ref_w, rtol=1e-10, atol=1e-12)
    violators = [ids[k] for k in range(len(ids)) if np.linalg.norm(ego[0] - others[k][0][0]) <= rr[k]]
    dominance = len(violators) > params.n_obs or set(violators) <= set(obs.ids)
    return ok, dominance


def test_oracle_smoke(rng):
    for _ in range(100):
        ok, dom = check_configuration(rng, PP)
        assert ok and dom
