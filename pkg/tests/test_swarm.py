from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmpc.controller import ControllerConfig, NmpcController, Setpoint
from swarmpc.model import ModelParams, discrete_step, hover_state
from swarmpc.priority import PriorityParams
from swarmpc.scenario import AgentSpec, ScenarioConfig
from swarmpc.swarm import (
    AgentState,
    EstimatorConfig,
    NonCooperativeAgent,
    ScenarioInvalid,
    SimSettings,
    SimWorld,
    _Tracker,
    build_world,
    check_initial,
    constant_velocity_predict,
    estimate_state,
    simulate,
)

vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


class TestConstantVelocity:
    def test_zero_velocity(self):
        P = constant_velocity_predict((1, 2, 3), (0, 0, 0), 40, 0.05)
        assert P.shape == (41, 3) and np.all(P == [1, 2, 3])

    def test_hand_value(self):
        P = constant_velocity_predict((0, 0, 0), (1, 0, 0), 40, 0.05)
        np.testing.assert_allclose(P[40], [2, 0, 0], rtol=1e-14)

    @given(vec, vec)
    def test_linearity(self, p, v):
        p = np.array(p)
        a = constant_velocity_predict(p, v, 10, 0.05) - p
        b = constant_velocity_predict(p, 2 * np.array(v), 10, 0.05) - p
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12, atol=1e-12)


class TestEstimator:
    def test_linear_motion_exact(self):
        v = np.array([0.3, -0.2, 0.1])
        samples = [np.array([1.0, 2, 3]) + k * 0.1 * v for k in range(4)]
        p, vh = estimate_state(samples, 0.1)
        np.testing.assert_allclose(vh, v, rtol=1e-12)
        np.testing.assert_array_equal(p, samples[-1])

    def test_spike_rejected_by_median(self):
        # x samples 0, 0.1, 0.5, 0.3 at dt = 0.1 -> differences 1, 4, -2 -> median 1
        samples = np.zeros((4, 3))
        samples[:, 0] = [0.0, 0.1, 0.5, 0.3]
        _, v = estimate_state(samples, 0.1, EstimatorConfig(outlier_threshold=50.0))
        assert v[0] == pytest.approx(1.0)

    def test_outlier_keeps_previous(self):
        samples = np.zeros((4, 3))
        samples[:, 1] = [0.0, 1.0, 2.0, 3.0]      # 10 m/s at dt = 0.1
        _, v = estimate_state(samples, 0.1, EstimatorConfig(outlier_threshold=5.0), prev_velocity=[0, 0.7, 0])
        assert v[1] == 0.7 and v[0] == 0.0

    def test_too_few_samples(self):
        p, v = estimate_state([[1, 2, 3], [1.5, 2, 3]], 0.1)
        np.testing.assert_array_equal(p, [1.5, 2, 3])
        assert np.all(v == 0)

    def test_tracker_starts_at_rest(self):
        tr = _Tracker([1, 1, 1], 0.005, EstimatorConfig())
        p, v = tr.estimate()
        assert np.all(p == 1) and np.all(v == 0)
        for k in range(1, 5):
            tr.push(np.array([1 + 0.005 * k, 1, 1]))
        np.testing.assert_allclose(tr.estimate()[1], [1, 0, 0], rtol=1e-9)

    @pytest.mark.parametrize("kw", [dict(noise_std=-1), dict(window=0), dict(outlier_threshold=0)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            EstimatorConfig(**kw)


class TestNonCooperative:
    def test_interpolation(self):
        nc = NonCooperativeAgent(1, (1.0, 3.0), ((0, 0, 1), (4, 0, 1)))
        np.testing.assert_allclose(nc.position(0.0), [0, 0, 1])
        np.testing.assert_allclose(nc.position(2.0), [2, 0, 1])
        np.testing.assert_allclose(nc.position(9.0), [4, 0, 1])
        np.testing.assert_allclose(nc.velocity(2.0), [2, 0, 0])
        assert np.all(nc.velocity(0.5) == 0) and np.all(nc.velocity(3.0) == 0)

    def test_times_strictly_increasing(self):
        with pytest.raises(ValueError):
            NonCooperativeAgent(1, (1.0, 1.0), ((0, 0, 1), (4, 0, 1)))


def _world(positions, integrator="rk4", plant_dt=0.005, noise=0.0, schedule=None):
    model = ModelParams()
    sim = SimSettings(plant_dt=plant_dt, integrator=integrator)
    cfg = ControllerConfig(solver=sim.solver_settings(ControllerConfig().solver))
    agents = []
    for i, p in enumerate(positions):
        x0 = hover_state(p)
        sched = schedule[i] if schedule else [(0.0, np.asarray(p, float))]
        est = EstimatorConfig(noise_std=noise)
        agents.append(AgentState(i, x0, NmpcController(cfg), sched, 0.4, model.hover_input().copy(),
                                 _Tracker(x0[0:3], plant_dt, est)))
    return SimWorld(agents, [], model, PriorityParams(), EstimatorConfig(noise_std=noise), sim, seed=0)


class TestWorld:
    def test_plant_equals_prediction_model(self):
        w = _world([(0, 0, 1)], integrator="euler", plant_dt=0.05,
                   schedule=[[(0.0, np.array([1.0, 0.5, 1.5]))]])
        for _ in range(5):
            x_before = w.agents[0].x.copy()
            r = w.tick()
            np.testing.assert_array_equal(r.states[0], discrete_step(x_before, r.inputs[0], w.model))

    def test_hold_position(self):
        w = _world([(0.5, -0.5, 1.0)])
        for _ in range(40):
            w.tick()
        np.testing.assert_allclose(w.agents[0].x, hover_state((0.5, -0.5, 1.0)), atol=1e-6)

    def test_bus_latency(self):
        w = _world([(0, 0, 1), (2, 0, 1)])
        assert w.bus == {}
        w.tick()
        assert {k: s for k, (_, s) in w.bus.items()} == {0: 0, 1: 0}
        w.tick()
        assert all(s == 1 for _, s in w.bus.values())

    def test_consumes_previous_tick_plans(self, monkeypatch):
        import swarmpc.swarm as sw
        w = _world([(0, 0, 1), (2, 0, 1)])
        w.tick()
        seen = []
        real = sw.predict_track

        def spy(shared, model, now=None):
            seen.append((shared.stamp, now))
            return real(shared, model, now)

        monkeypatch.setattr(sw, "predict_track", spy)
        w.tick()
        assert seen and all(now - stamp == 1 for stamp, now in seen)

    def test_plant_dt_must_divide(self):
        with pytest.raises(ScenarioInvalid):
            _world([(0, 0, 1)], plant_dt=0.03)


def _scenario(**kw):
    agents = (AgentSpec(0, (-1.0, 0.0, 1.0), ((0.0, (1.0, 0.0, 1.0)),)),
              AgentSpec(1, (1.0, 1.0, 1.0), ((0.0, (-1.0, 1.0, 1.0)),)))
    return replace(ScenarioConfig(name="pair", agents=agents, duration=1.0), **kw)


class TestSimulate:
    def test_zero_duration(self):
        log = simulate(_scenario(duration=0.0))
        assert log.n_ticks == 1
        np.testing.assert_array_equal(log.states[0, :, 0:3], [[-1, 0, 1], [1, 1, 1]])
        assert np.all(np.isnan(log.inputs))

    def test_log_length(self):
        log = simulate(_scenario(duration=0.5))
        assert log.n_ticks == 11 and log.states.shape == (11, 2, 8)
        assert np.all(np.isfinite(log.solve_time[:-1])) and np.all(np.isnan(log.solve_time[-1]))
        assert log.min_dist.shape == (11,)

    def test_overlapping_start(self):
        agents = (AgentSpec(0, (0.0, 0.0, 1.0)), AgentSpec(1, (0.2, 0.0, 1.0)))
        with pytest.raises(ScenarioInvalid):
            build_world(ScenarioConfig(agents=agents))
        with pytest.raises(ScenarioInvalid):
            check_initial([(0, 0, 0), (0, 0.39, 0)], [0.4, 0.1])
        check_initial([(0, 0, 0), (0, 0.4, 0)], [0.4, 0.4])

    def test_seeded_noise_deterministic(self):
        sc = _scenario(estimator=EstimatorConfig(noise_std=0.002), seed=3)
        a, b = simulate(sc), simulate(sc)
        np.testing.assert_array_equal(a.states, b.states)
        c = simulate(replace(sc, seed=4))
        assert not np.array_equal(a.states, c.states)

    def test_parallel_matches_serial(self):
        sc = _scenario()
        a = simulate(sc)
        b = simulate(replace(sc, sim=SimSettings(workers=2)))
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.selected, b.selected)

    def test_noncooperative_logged(self):
        nc = NonCooperativeAgent(50, (0.0, 1.0), ((0, 3, 1), (0, 4, 1)))
        log = simulate(_scenario(non_cooperative=(nc,), duration=0.5))
        assert log.nc_ids == [50]
        np.testing.assert_allclose(log.nc_positions[-1, 0], [0, 3.5, 1])
        assert np.all(log.min_dist_nc > 1.5)


def test_step_setpoint_reached():
    """A 2 m step is tracked to within 5 cm inside 10 s."""
    sc = ScenarioConfig(agents=(AgentSpec(0, (0.0, 0.0, 1.0), ((0.0, (2.0, 0.0, 1.0)),)),), duration=10.0)
    log = simulate(sc)
    err = np.linalg.norm(log.states[:, 0, 0:3] - [2, 0, 1], axis=1)
    assert err[-1] < 0.05


def test_hover_input():
    ctrl = NmpcController(ControllerConfig())
    sp = Setpoint.hover_at((0, 0, 1))
    np.testing.assert_allclose(ctrl.solve_step(sp.x_ref, [9.81, 0, 0], sp).applied_input, [9.81, 0, 0], atol=1e-3)
