import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ampc.collision import MotionScript, Obstacle
from ampc.dynamics import FirstOrder, SecondOrder, step_response
from ampc.metrics import compute_metrics, executed_costs, overshoot_percent
from ampc.sim import TraceRecord


def trace_from(t, v, x=None, y=None, clearance=5.0):
    x = np.cumsum(v) * 0.1 if x is None else x
    y = np.zeros_like(t) if y is None else y
    return [TraceRecord(float(ti), float(xi), float(yi), 0.0, 0.0, float(vi), float(vi), 0.0, clearance, 1,
                        1.0, False) for ti, xi, yi, vi in zip(t, x, y, v)]


class TestOvershoot:
    def test_constant(self):
        t = np.arange(50) * 0.1
        rep = compute_metrics(trace_from(t, np.full(50, 12.0)))
        assert rep.velocity_overshoot == 0.0
        assert rep.settling_oscillation == 0.0

    def test_first_order_has_none(self):
        t, v = step_response(FirstOrder(0.5), 10.0, 15.0, 8.0, 0.1)
        assert overshoot_percent(t, v) == 0.0
        t, v = step_response(FirstOrder(0.5), 15.0, 12.0, 8.0, 0.1)
        assert overshoot_percent(t, v) == 0.0

    @pytest.mark.parametrize("v0,vc", [(0.0, 10.0), (15.0, 12.0)])
    def test_second_order_matches_formula(self, v0, vc):
        zeta = 0.7
        t, v = step_response(SecondOrder(2.0, zeta), v0, vc, 10.0, 0.01)
        expected = math.exp(-zeta * math.pi / math.sqrt(1 - zeta ** 2)) * 100
        assert expected == pytest.approx(4.6, abs=0.01)
        assert overshoot_percent(t, v) == pytest.approx(expected, abs=0.1)

    def test_second_order_oscillates_more(self):
        t, fo = step_response(FirstOrder(0.5), 10.0, 15.0, 8.0, 0.1)
        _, so = step_response(SecondOrder(2.0, 0.3), 10.0, 15.0, 8.0, 0.1)
        a = compute_metrics(trace_from(t, fo))
        b = compute_metrics(trace_from(t, so))
        assert b.settling_oscillation > a.settling_oscillation

    def test_explicit_target(self):
        t = np.arange(40) * 0.1
        v = np.concatenate([np.linspace(15.0, 11.0, 20), np.linspace(11.0, 12.0, 20)])
        # braking 15 -> 12 that dips to 11: one third of the change
        assert overshoot_percent(t, v, target=12.0) == pytest.approx(100.0 / 3.0)
        rep = compute_metrics(trace_from(t, v), transitions=[(0.0, 3.9, 12.0)])
        assert rep.velocity_overshoot == pytest.approx(100.0 / 3.0)
        assert overshoot_percent(t, np.linspace(15.0, 12.0, 40), target=12.0) == 0.0

    def test_transition_windows(self):
        t = np.arange(100) * 0.1
        v = np.where(t < 5.0, 10.0, 12.0)
        v[t > 8.0] = 20.0  # outside the window, ignored
        rep = compute_metrics(trace_from(t, v), transitions=[(4.0, 8.0)])
        assert rep.velocity_overshoot == 0.0


class TestDistances:
    def test_gap_from_actual_states(self):
        t = np.arange(20) * 0.1
        v = np.full(20, 10.0)
        x = 10.0 * t
        ob = Obstacle("lead", MotionScript(20.0, 0.0, 0.0, 5.0), 2.0, offsets=(0.0,))
        rep = compute_metrics(trace_from(t, v, x=x), obstacles=[ob])
        # closest at the last tick: ego front circle at x+1.5, lead at 20 + 5t
        expected = (20.0 + 5.0 * t[-1]) - (x[-1] + 1.5) - 2.0
        assert rep.min_distance_per_obstacle["lead"] == pytest.approx(expected)
        assert rep.min_inter_vehicle_distance == pytest.approx(expected)

    def test_falls_back_to_trace_column(self):
        t = np.arange(5) * 0.1
        rep = compute_metrics(trace_from(t, np.full(5, 3.0), clearance=0.75))
        assert rep.min_inter_vehicle_distance == 0.75

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_nonnegative_iff_no_overlap(self, ox, oy):
        ob = Obstacle("o", MotionScript(ox, oy), 2.0, offsets=(0.0,))
        rep = compute_metrics(trace_from(np.zeros(1), np.zeros(1), x=np.zeros(1)), obstacles=[ob],
                              ego_offsets=(0.0,))
        assert (rep.min_inter_vehicle_distance >= 0) == (math.hypot(ox, oy) >= 2.0)


class TestCosts:
    def test_executed_costs(self):
        v = np.array([0.0, 1.0, 4.0, 9.0])
        J_v, J_th = executed_costs(v, [1.0, -2.0, 0.0, 0.0], 0.1)
        assert J_v == pytest.approx(2 * (2.0 / 0.01) ** 2)
        assert J_th == pytest.approx(5.0)

    def test_idempotent(self):
        t, v = step_response(SecondOrder(2.0, 0.7), 10.0, 15.0, 6.0, 0.1)
        tr = trace_from(t, v)
        assert compute_metrics(tr).as_dict() == compute_metrics(tr).as_dict()

    def test_empty_trace(self):
        rep = compute_metrics([])
        assert rep.ticks == 0 and rep.min_inter_vehicle_distance == math.inf
