import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ampc.dynamics import (ConstantTau, FirstOrder, LinearRamp, PiecewiseLinearTau, SecondOrder, VehicleState,
                           chain_affine_map, decay_factors, first_order_response, fit_tau, plant_step,
                           propagate_state, step_response, tau_at, velocity_chain, wrap_angle, wrap_angles)
from ampc.errors import IdentificationError, InvalidInputError, InvalidParameterError


def chain_oracle(v0, v_c, dt, tau):
    """Sum-of-exponentials form written out term by term, no shared code with the package."""
    m = math.exp(-dt / tau)
    out = []
    for i in range(len(v_c)):
        v = v0 * m ** (i + 1)
        for j in range(i + 1):
            v += v_c[j] * (1 - m) * m ** (i - j)
        out.append(v)
    return np.array(out)


class TestPropagateState:
    def test_straight_line(self):
        s = propagate_state(VehicleState(), 5.0, 0.0, 0.1)
        assert (s.x, s.y, s.theta, s.theta_dot) == pytest.approx((0.5, 0.0, 0.0, 0.0))

    def test_pointing_up(self):
        s = propagate_state(VehicleState(theta=math.pi / 2), 5.0, 0.0, 0.1)
        assert s.x == pytest.approx(0.0, abs=1e-15)
        assert s.y == pytest.approx(0.5)

    def test_turning_step(self):
        s = propagate_state(VehicleState(1.0, 2.0, 0.3, 0.1), 4.0, 0.5, 0.1)
        assert s.x == pytest.approx(1 + 0.4 * math.cos(0.3), abs=1e-14)
        assert s.y == pytest.approx(2 + 0.4 * math.sin(0.3), abs=1e-14)
        assert s.theta == pytest.approx(0.3125, abs=1e-14)
        assert s.theta_dot == pytest.approx(0.15, abs=1e-14)
        assert s.v == 4.0

    def test_heading_wrapped(self):
        s = propagate_state(VehicleState(theta=3.1, theta_dot=1.0), 1.0, 0.0, 0.1)
        assert -math.pi < s.theta <= math.pi
        assert wrap_angle(s.theta - 3.2) == pytest.approx(0.0, abs=1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            propagate_state(VehicleState(x=math.nan), 1.0, 0.0, 0.1)
        with pytest.raises(InvalidInputError):
            propagate_state(VehicleState(), math.inf, 0.0, 0.1)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-3, 3), st.floats(0, 30), st.integers(1, 60))
    def test_zero_controls_keep_heading_and_speed(self, x, y, th, v, n):
        s0 = VehicleState(x, y, th, 0.0, v)
        s = s0
        for _ in range(n):
            s = propagate_state(s, v, 0.0, 0.1)
        assert wrap_angle(s.theta - th) == pytest.approx(0.0, abs=1e-12)
        assert s.theta_dot == 0.0 and s.v == v
        assert propagate_state(s0, v, 0.0, 0.1) == propagate_state(s0, v, 0.0, 0.1)


class TestWrap:
    def test_range(self):
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
        np.testing.assert_allclose(wrap_angles([0.0, 2 * math.pi, -math.pi]), [0.0, 0.0, math.pi], atol=1e-15)

    @given(st.floats(-100, 100))
    def test_wrap_preserves_angle(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.cos(w) == pytest.approx(math.cos(a), abs=1e-9)
        assert math.sin(w) == pytest.approx(math.sin(a), abs=1e-9)


class TestFirstOrderResponse:
    def test_no_error_signal(self):
        assert first_order_response(7.0, 7.0, 0.3, 2.0) == 7.0

    def test_one_time_constant(self):
        assert first_order_response(0.0, 10.0, 1.0, 1.0) == pytest.approx(6.32121, abs=1e-5)
        assert first_order_response(0.0, 10.0, 1.0, 1.0) == pytest.approx(10 * (1 - math.exp(-1)), abs=1e-14)

    def test_steady_state(self):
        assert first_order_response(0.0, 10.0, 1.0, 1e3) == pytest.approx(10.0, abs=1e-12)

    def test_bad_tau(self):
        with pytest.raises(InvalidParameterError):
            first_order_response(0.0, 1.0, 0.0, 1.0)


class TestVelocityChain:
    def test_single_step(self):
        np.testing.assert_allclose(velocity_chain(0.0, [10.0], 0.1, 0.5), [1.81269], atol=1e-5)

    def test_two_steps(self):
        v = velocity_chain(0.0, [10.0, 10.0], 0.1, 0.5)
        np.testing.assert_allclose(v, [1.81269, 3.29680], atol=1e-5)
        np.testing.assert_allclose(v[1], 10 * (1 - math.exp(-0.4)), atol=1e-12)

    def test_equilibrium(self):
        np.testing.assert_allclose(velocity_chain(6.0, np.full(20, 6.0), 0.1, 0.5), 6.0, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            velocity_chain(0.0, [], 0.1, 0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 30), st.lists(st.floats(0, 30), min_size=1, max_size=50),
           st.floats(0.01, 0.5), st.floats(0.05, 3.0))
    def test_matches_oracle_and_closed_form(self, v0, v_c, dt, tau):
        rec = velocity_chain(v0, v_c, dt, tau)
        closed = velocity_chain(v0, v_c, dt, tau, closed_form=True)
        oracle = chain_oracle(v0, v_c, dt, tau)
        np.testing.assert_allclose(rec, oracle, atol=1e-9)
        np.testing.assert_allclose(closed, rec, atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 50), st.integers(0, 2**31 - 1))
    def test_superposition(self, n, seed):
        rng = np.random.default_rng(seed)
        v0, dt, tau = rng.uniform(0, 20), rng.uniform(0.02, 0.3), rng.uniform(0.1, 2.0)
        a, b = rng.uniform(-10, 10, n), rng.uniform(-10, 10, n)
        f = lambda u: velocity_chain(v0, u, dt, tau)
        np.testing.assert_allclose(f(a + b) - f(a) - f(b) + f(np.zeros(n)), 0.0, atol=1e-9)

    def test_affine_map_rows(self):
        m = np.full(5, math.exp(-0.2))
        off, gain = chain_affine_map(3.0, m)
        c = np.arange(5.0)
        v = off + gain @ c
        assert v[0] == 3.0
        np.testing.assert_allclose(v[1:], velocity_chain(3.0, c, 0.1, 0.5), atol=1e-12)


class TestPlantStep:
    def test_first_order_equilibrium(self):
        s = plant_step(VehicleState(v=10.0), 10.0, 0.0, FirstOrder(0.5), 0.1)
        assert s.v == pytest.approx(10.0, abs=1e-12)

    def test_linear_ramp_reaches_command(self):
        s = plant_step(VehicleState(v=10.0), 12.0, 0.0, LinearRamp(), 0.1)
        assert s.v == 12.0

    @pytest.mark.parametrize("dt_sub", [0.1, 0.05, 0.01, 0.001])
    def test_first_order_endpoint(self, dt_sub):
        s = plant_step(VehicleState(), 10.0, 0.0, FirstOrder(0.5), 0.1, dt_sub)
        assert s.v == pytest.approx(10 * (1 - math.exp(-0.2)), abs=1e-6)

    def test_fine_substeps_match_analytic(self):
        s = plant_step(VehicleState(v=3.0), 9.0, 0.0, FirstOrder(0.7), 0.1, 0.001)
        assert s.v == pytest.approx(first_order_response(3.0, 9.0, 0.7, 0.1), abs=1e-6)

    def test_substep_larger_than_step(self):
        with pytest.raises(InvalidParameterError):
            plant_step(VehicleState(), 10.0, 0.0, FirstOrder(0.5), 0.1, 0.2)

    def test_position_uses_varying_speed(self):
        # pose integrates the time-varying body velocity: distance lies between start and end speed
        s = plant_step(VehicleState(v=0.0), 10.0, 0.0, FirstOrder(0.5), 0.1, 0.001)
        assert 0.0 < s.x < s.v * 0.1

    def test_second_order_overshoots(self):
        t, v = step_response(SecondOrder(2.0, 0.7), 0.0, 10.0, 8.0, 0.01)
        expected = 10 * (1 + math.exp(-0.7 * math.pi / math.sqrt(1 - 0.49)))
        assert v.max() == pytest.approx(expected, rel=2e-3)
        assert v[-1] == pytest.approx(10.0, abs=0.05)


class TestFitTau:
    @staticmethod
    def samples(tau, rng=None, sigma=0.0):
        rows = []
        for v0, vc in [(0.0, 5.0), (5.0, 12.0), (12.0, 8.0), (8.0, 15.0)]:
            t = np.arange(1, 31) * 0.05
            v = vc + (v0 - vc) * np.exp(-t / tau)
            if rng is not None:
                v = v + rng.normal(0.0, sigma, t.size)
            rows += [(ti, vi, v0, vc) for ti, vi in zip(t, v)]
        return np.array(rows)

    def test_noiseless(self):
        assert fit_tau(self.samples(0.7)) == pytest.approx(0.7, abs=1e-9)

    def test_noisy_monte_carlo(self):
        fits = [fit_tau(self.samples(0.7, np.random.default_rng(s), 0.01)) for s in range(100)]
        assert max(abs(f - 0.7) for f in fits) <= 0.05

    def test_single_sample(self):
        with pytest.raises(IdentificationError):
            fit_tau([(0.1, 1.0, 0.0, 10.0)])

    def test_overshoot_samples_dropped(self):
        rows = np.vstack([self.samples(0.7), [[1.0, 16.0, 8.0, 15.0]]])
        assert fit_tau(rows) == pytest.approx(0.7, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.2, 5.0))
    def test_recovers_any_tau(self, tau):
        # below ~0.2 s the late samples sit at the rounding floor of v_c - v
        assert fit_tau(self.samples(tau)) == pytest.approx(tau, rel=1e-9)


class TestTauSchedule:
    def test_constant(self):
        assert tau_at(ConstantTau(0.5), 17.0) == 0.5

    def test_piecewise(self):
        sched = PiecewiseLinearTau([(0, 0.4), (10, 0.6)])
        assert tau_at(sched, 5.0) == pytest.approx(0.5)
        assert tau_at(sched, 20.0) == pytest.approx(0.6)
        np.testing.assert_allclose(tau_at(sched, np.array([-1.0, 2.5])), [0.4, 0.45])

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            ConstantTau(0.0)
        with pytest.raises(InvalidParameterError):
            PiecewiseLinearTau([(5, 0.4), (1, 0.6)])
        with pytest.raises(InvalidParameterError):
            FirstOrder(-1.0)

    def test_decay_factors(self):
        np.testing.assert_allclose(decay_factors(FirstOrder(0.5), 0.1, 3), math.exp(-0.2))
        np.testing.assert_array_equal(decay_factors(LinearRamp(), 0.1, 3), 0.0)
        sched = PiecewiseLinearTau([(0, 0.4), (10, 0.6)])
        np.testing.assert_allclose(decay_factors(sched, 0.1, 2, [0.0, 10.0]),
                                   [math.exp(-0.25), math.exp(-0.1 / 0.6)])
