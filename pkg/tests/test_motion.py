import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from safenav.geometry import Point2
from safenav.motion import (ControlInput, MotionLimits, MotionState,
                            NoiseParams, TerrainModel, deterministic_step,
                            step, step_array, terrain_travel_time,
                            update_heading, update_position, update_velocity,
                            wrap_angle, wrap_angle_array)

FLAT = TerrainModel()


def make_limits(**kw):
    base = dict(a=2.0, d=3.0, m=1.0, v_max=6.0, dt=0.1)
    base.update(kw)
    return MotionLimits(**base)


class TestWrapAngle:
    def test_in_range_unchanged(self):
        assert wrap_angle(0.3) == 0.3
        assert wrap_angle(math.pi) == math.pi

    def test_wraps_down(self):
        assert wrap_angle(math.pi + 0.1) == pytest.approx(-math.pi + 0.1)

    def test_minus_pi_maps_to_pi(self):
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)

    @given(st.floats(-50.0, 50.0))
    def test_range_and_equivalence(self, theta):
        w = wrap_angle(theta)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)
        assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)

    def test_array_matches_scalar(self):
        thetas = np.linspace(-10, 10, 101)
        expected = np.array([wrap_angle(t) for t in thetas])
        assert np.array_equal(wrap_angle_array(thetas), expected)


class TestUpdateVelocity:
    def test_accel_branch(self):
        lim = make_limits()
        assert update_velocity(5.0, ControlInput(10.0), lim) == pytest.approx(5.2)

    def test_steady_state(self):
        lim = make_limits()
        assert update_velocity(5.0, ControlInput(5.0), lim) == 5.0

    def test_decel_branch(self):
        lim = make_limits()
        assert update_velocity(5.0, ControlInput(0.0), lim) == pytest.approx(4.7)

    def test_capped_at_v_max(self):
        lim = make_limits(v_max=5.1)
        assert update_velocity(5.0, ControlInput(10.0), lim) == 5.1

    @given(st.floats(0.0, 6.0), st.floats(0.0, 10.0))
    def test_result_in_range(self, v, v_des):
        lim = make_limits()
        out = update_velocity(v, ControlInput(v_des), lim)
        assert 0.0 <= out <= lim.v_max


class TestUpdateHeading:
    def test_unclipped(self):
        lim = make_limits(m=1.0, dt=0.1)
        assert update_heading(0.0, ControlInput(1.0, 0.05), lim) == pytest.approx(0.05)

    def test_zero_command(self):
        lim = make_limits()
        assert update_heading(0.0, ControlInput(1.0, 0.0), lim) == 0.0

    def test_clipped(self):
        lim = make_limits(m=2.0, dt=0.1)
        assert update_heading(1.0, ControlInput(1.0, -0.5), lim) == pytest.approx(0.8)

    @given(st.floats(-math.pi, math.pi), st.floats(-10, 10))
    def test_change_bounded_by_maneuverability(self, theta, dth):
        lim = make_limits(m=1.5, dt=0.1)
        out = update_heading(theta, ControlInput(1.0, dth), lim)
        diff = abs(wrap_angle(out - theta))
        assert diff <= lim.m * lim.dt + 1e-12


class TestUpdatePosition:
    def test_east(self):
        lim = make_limits(dt=0.5)
        s = MotionState(Point2(0, 0), 2.0, 0.0)
        p = update_position(s, lim)
        assert (p.x, p.y) == pytest.approx((1.0, 0.0))

    def test_north(self):
        lim = make_limits(dt=0.5)
        s = MotionState(Point2(0, 0), 2.0, math.pi / 2)
        p = update_position(s, lim)
        assert p.x == pytest.approx(0.0, abs=1e-12)
        assert p.y == pytest.approx(1.0)

    def test_stationary(self):
        lim = make_limits()
        s = MotionState(Point2(3, 4), 0.0, 1.0)
        p = update_position(s, lim)
        assert (p.x, p.y) == (3.0, 4.0)


class TestTerrainTravelTime:
    def test_no_terrain(self):
        assert terrain_travel_time(Point2(0, 0), Point2(3, 4), 5.0, FLAT) == 1.0

    def test_with_delay(self):
        terrain = TerrainModel(tau=2.5)
        assert terrain_travel_time(Point2(0, 0), Point2(3, 4), 5.0, terrain) == 1.5

    def test_zero_distance(self):
        assert terrain_travel_time(Point2(1, 1), Point2(1, 1), 5.0, FLAT) == 0.0

    def test_stalled_raises(self):
        with pytest.raises(ValueError):
            terrain_travel_time(Point2(0, 0), Point2(1, 0), 0.0, FLAT)

    def test_grid_lookup(self):
        terrain = TerrainModel(grid=np.array([[0.0, 1.0], [2.0, 3.0]]),
                               origin=(0.0, 0.0), cell_size=10.0)
        assert terrain.tau_at(5.0, 5.0) == 0.0
        assert terrain.tau_at(15.0, 5.0) == 1.0
        assert terrain.tau_at(5.0, 15.0) == 2.0
        assert terrain.tau_at(100.0, 100.0) == 3.0  # clamped


class TestStep:
    def test_zero_noise_equals_deterministic_chain(self):
        lim = make_limits(dt=0.5)
        rng = np.random.default_rng(0)
        s = MotionState(Point2(0, 0), 2.0, 0.0)
        u = ControlInput(2.0, 0.0)
        out = step(s, u, lim, NoiseParams.zero(), FLAT, rng)
        assert (out.position.x, out.position.y) == (1.0, 0.0)
        det = deterministic_step(s, u, lim, FLAT)
        assert out.position.x == det.position.x
        assert out.position.y == det.position.y
        assert out.v == det.v and out.theta == det.theta

    def test_terrain_delay_extends_displacement(self):
        lim = make_limits(dt=0.5)
        terrain = TerrainModel(tau=1.0)
        s = MotionState(Point2(0, 0), 2.0, 0.3)
        u = ControlInput(2.0, 0.0)
        rng = np.random.default_rng(0)
        out = step(s, u, lim, NoiseParams.zero(), terrain, rng)
        disp = math.hypot(out.position.x, out.position.y)
        t_tau = terrain_travel_time(
            s.position,
            Point2(s.position.x + out.v * lim.dt * math.cos(out.theta),
                   s.position.y + out.v * lim.dt * math.sin(out.theta)),
            out.v, terrain)
        assert disp == pytest.approx(out.v * t_tau, rel=1e-12)
        assert disp > out.v * lim.dt

    def test_seeded_reproducibility(self):
        lim = make_limits()
        noise = NoiseParams(sigma_x=0.1, sigma_y=0.1, sigma_vx=0.05,
                            sigma_ax=0.2, sigma_theta=0.02)
        s = MotionState(Point2(1, 2), 3.0, 0.5)
        u = ControlInput(4.0, 0.1)
        a = step(s, u, lim, noise, FLAT, np.random.default_rng(99))
        b = step(s, u, lim, noise, FLAT, np.random.default_rng(99))
        assert a == b

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 6), st.floats(0, 8), st.floats(-3, 3), st.integers(0, 2**32 - 1))
    def test_speed_stays_clamped(self, v, v_des, dth, seed):
        lim = make_limits()
        noise = NoiseParams(sigma_vx=1.0, sigma_ax=2.0, sigma_theta=0.5,
                            sigma_x=0.5, sigma_y=0.5)
        s = MotionState(Point2(0, 0), v, 0.0)
        out = step(s, ControlInput(v_des, dth), lim, noise, FLAT,
                   np.random.default_rng(seed))
        assert 0.0 <= out.v <= lim.v_max
        assert -math.pi < out.theta <= math.pi

    def test_mean_error_unbiased(self):
        # one-step realized-minus-deterministic errors average to zero within
        # three standard errors (state kept away from the clamp boundaries)
        lim = make_limits()
        noise = NoiseParams(sigma_x=0.05, sigma_y=0.05, sigma_vx=0.02,
                            sigma_theta=0.01)
        s = MotionState(Point2(0, 0), 3.0, 0.4)
        u = ControlInput(3.0, 0.0)
        det = deterministic_step(s, u, lim, FLAT)
        rng = np.random.default_rng(4)
        n = 10_000
        errs = np.empty((n, 2))
        for i in range(n):
            out = step(s, u, lim, noise, FLAT, rng)
            errs[i] = (out.position.x - det.position.x,
                       out.position.y - det.position.y)
        se = errs.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(errs.mean(axis=0)) < 3.0 * se)


class TestStepArray:
    def test_matches_scalar_semantics_zero_noise(self):
        lim = make_limits()
        u = ControlInput(4.0, 0.2)
        states = np.array([[0.0, 0.0, 2.0, 0.1],
                           [5.0, -3.0, 6.0, -2.0],
                           [1.0, 1.0, 0.0, 3.0]])
        out = step_array(states, u, lim, NoiseParams.zero(), FLAT,
                         np.random.default_rng(0))
        for row_in, row_out in zip(states, out):
            s = MotionState(Point2(row_in[0], row_in[1]), row_in[2], row_in[3])
            det = deterministic_step(s, u, lim, FLAT)
            assert np.allclose(row_out, det.as_array(), atol=1e-12)
