import math

import numpy as np
import pytest

from ampc.dynamics import FirstOrder, Plant, SecondOrder, VehicleState
from ampc.errors import PlannerFailure
from ampc.planner import PlannerConfig, plan
from ampc.planner.common import shift_guess
from ampc.scenarios import bundled
from ampc.sim import (TRACE_COLUMNS, SimState, braking_guess, plan_with_restart, read_trace, run, swerve_guess,
                      tick, write_trace)


def open_road_config(**kw):
    return PlannerConfig(goal=(1e4, 0.0, 0.0), **kw)


class TestRun:
    def test_record_count(self):
        cfg = open_road_config()
        trace = run(VehicleState(v=10.0), [], cfg, 1.0)
        assert len(trace) == 11
        np.testing.assert_allclose([r.t for r in trace], np.arange(11) * 0.1, atol=1e-12)

    def test_zero_duration(self):
        assert run(VehicleState(v=10.0), [], open_road_config(), 0.0) == []

    def test_reaches_top_speed(self):
        cfg = open_road_config()
        trace = run(VehicleState(v=10.0), [], cfg, 0.0, ticks=100)
        assert trace[-1].v_body == pytest.approx(cfg.v_max, rel=0.02)
        assert max(abs(r.theta) for r in trace) < 1e-6
        assert max(r.v_body for r in trace) <= cfg.v_max + 1e-6

    def test_matched_plant_tracks_prediction(self):
        # the plant sub-steps the same exponential the planner uses, so velocities agree exactly;
        # positions differ by the held-velocity approximation, largest while accelerating
        cfg = open_road_config(N=30)
        plans = []
        run(VehicleState(v=20.0), [], cfg, 0.0, plant_model=FirstOrder(0.5), ticks=40,
            on_tick=lambda sim, rec: plans.append((sim.last_plan, sim.ego)))
        for (p, ego_next) in plans:
            pred = p.guess
            assert ego_next.v == pytest.approx(pred.v[1], abs=1e-9)
            accel = abs(pred.v[1] - pred.v[0]) / cfg.dt
            assert math.hypot(ego_next.x - pred.x[1], ego_next.y - pred.y[1]) <= 1e-3 + 0.5 * accel * cfg.dt ** 2

    def test_matched_plant_cruise_positions(self):
        cfg = PlannerConfig(N=30, v_max=15.0, goal=(1e4, 0.0, 0.0))
        plans = []
        run(VehicleState(v=15.0), [], cfg, 0.0, plant_model=FirstOrder(0.5), ticks=20,
            on_tick=lambda sim, rec: plans.append((sim.last_plan, sim.ego)))
        for p, ego_next in plans:
            assert math.hypot(ego_next.x - p.guess.x[1], ego_next.y - p.guess.y[1]) <= 1e-3

    def test_second_order_plant_stays_bounded(self):
        sc = bundled("sudden_brake")
        cfg = sc.planner_config()
        trace = run(sc.ego, sc.all_obstacles(), cfg, 30.0, "am", SecondOrder(2.0, 0.7), goal_fn=sc.goal_fn(cfg))
        v = np.array([r.v_body for r in trace])
        assert np.all(np.isfinite(v))
        assert v.max() < cfg.v_max * 1.2 and v.min() > -1.0
        assert min(r.min_clearance for r in trace) >= 0.0
        assert not any(r.degraded_flag for r in trace)


class TestTick:
    def test_applies_first_control_and_shifts_warm_start(self):
        cfg = open_road_config(N=20)
        seen = []

        def spy(state0, obstacles, config, warm=None, t=0.0, v_c_prev=None):
            seen.append(warm)
            return plan(state0, obstacles, config, warm=warm, t=t, v_c_prev=v_c_prev)

        plant = Plant(FirstOrder(0.5))
        sim = SimState(0.0, VehicleState(v=8.0), plant, [])
        sim1, rec0 = tick(sim, spy, cfg)
        assert seen[0] is None
        assert rec0.v_cmd == sim1.last_plan.controls.v_c[0]
        assert rec0.theta_ddot_cmd == sim1.last_plan.controls.theta_ddot[0]
        sim2, _ = tick(sim1, spy, cfg)
        expected = shift_guess(sim1.last_plan.guess, sim1.ego, cfg)
        np.testing.assert_array_equal(seen[1].v_c, expected.v_c)
        np.testing.assert_array_equal(seen[1].v_c[:-1], sim1.last_plan.controls.v_c[1:])
        np.testing.assert_array_equal(seen[1].theta_ddot[:-1], sim1.last_plan.controls.theta_ddot[1:])
        assert sim2.t == pytest.approx(0.2)

    def test_fallback_on_failure(self):
        cfg = open_road_config()

        def broken(*a, **k):
            raise PlannerFailure("boom")

        sim = SimState(0.0, VehicleState(v=10.0), Plant(FirstOrder(0.5)), [])
        sim1, rec = tick(sim, broken, cfg)
        assert rec.degraded_flag
        assert rec.v_cmd == pytest.approx(10.0 + cfg.a_min * cfg.dt)
        assert rec.theta_ddot_cmd == 0.0
        _, rec2 = tick(sim1, broken, cfg)
        assert rec2.v_cmd == pytest.approx(10.0 + 2 * cfg.a_min * cfg.dt)

    def test_collision_flagged_not_raised(self):
        from ampc.collision import MotionScript, Obstacle
        cfg = open_road_config()
        ob = Obstacle("on-top", MotionScript(0.0, 0.0), 2.0)
        trace = run(VehicleState(v=5.0), [ob], cfg, 0.0, ticks=2)
        assert trace[0].collision and trace[0].min_clearance < 0


class TestRestartGuesses:
    def test_braking_guess_slows(self):
        cfg = PlannerConfig()
        g = braking_guess(VehicleState(v=10.0), cfg)
        assert np.all(np.diff(g.v_c) <= 0) and g.v_c.min() >= 0.0
        assert g.v_c[0] == pytest.approx(10.0 + 0.5 * cfg.a_min * cfg.dt)

    @pytest.mark.parametrize("lateral", [3.5, -3.5])
    def test_swerve_guess_moves_sideways(self, lateral):
        cfg = PlannerConfig()
        g = swerve_guess(VehicleState(v=10.0), cfg, lateral)
        assert g.y[-1] == pytest.approx(lateral, rel=0.05)
        assert np.all(np.abs(g.theta_ddot) <= cfg.theta_ddot_max + 1e-12)

    def test_restart_keeps_best_and_sums_iterations(self):
        calls = []

        def fake(state0, obstacles, config, warm=None, t=0.0, v_c_prev=None):
            res = plan(state0, [], config, warm=warm)
            calls.append(res.iterations)
            from dataclasses import replace
            return replace(res, max_violation=1.0 if len(calls) == 1 else 0.0)

        cfg = open_road_config(N=20)
        res = plan_with_restart(fake, VehicleState(v=10.0), [], cfg, None, 0.0, None)
        assert len(calls) == 2
        assert res.max_violation == 0.0
        assert res.iterations == sum(calls)


class TestTraceFile:
    def test_round_trip(self, tmp_path):
        cfg = open_road_config(N=20)
        trace = run(VehicleState(v=10.0), [], cfg, 0.5)
        path = tmp_path / "trace.csv"
        write_trace(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0].split(",") == list(TRACE_COLUMNS)
        assert len(lines) == len(trace) + 1
        back = read_trace(path)
        for rec, row in zip(trace, back):
            assert row["x"] == pytest.approx(rec.x, rel=1e-8, abs=1e-12)
            assert row["iters"] == rec.iters
            assert row["degraded_flag"] == rec.degraded_flag
        assert "-0," not in path.read_text()

    def test_nine_significant_digits(self, tmp_path):
        from ampc.sim import _fmt
        assert _fmt(math.pi) == "3.14159265"
        assert _fmt(-0.0) == "0"
        assert _fmt(True) == "1"
