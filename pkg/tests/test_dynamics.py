import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evasim.dynamics import (
    G0,
    EngagementGeometry,
    UncertainParams,
    approx_final_time,
    batch_matvec,
    closed_loop_matrix,
    make_double_integrator,
    make_first_order_zoh,
    make_state,
    psi,
    step,
    upsilon,
)
from evasim.guidance import GuidanceMode


def test_gravity_constant():
    assert G0 == 9.80665


class TestDoubleIntegrator:
    def test_small_step(self):
        m = make_double_integrator(0.01)
        np.testing.assert_array_equal(m.F, [[1.0, 0.01], [0.0, 1.0]])
        np.testing.assert_allclose(m.g_T, [5.0e-5, 0.01], rtol=1e-15)
        assert m.dim == 2

    def test_unit_step(self):
        m = make_double_integrator(1.0)
        np.testing.assert_array_equal(m.g_T, [0.5, 1.0])

    def test_pursuer_gain_opposes_evader(self):
        # relative coordinate is evader minus pursuer
        m = make_double_integrator(0.1)
        np.testing.assert_array_equal(m.g_M, -m.g_T)

    @pytest.mark.parametrize("dt", [0.0, -0.1])
    def test_rejects_non_positive_dt(self, dt):
        with pytest.raises(ValueError):
            make_double_integrator(dt)

    def test_arrays_are_read_only(self):
        m = make_double_integrator(0.01)
        with pytest.raises(ValueError):
            m.F[0, 0] = 2.0


class TestLagHelpers:
    def test_zero(self):
        assert psi(0.0) == 0.0
        assert upsilon(0.0) == 0.0

    def test_unit_argument(self):
        assert psi(1.0) == pytest.approx(0.36787944117144233, rel=1e-14)
        assert upsilon(1.0) == pytest.approx(0.13212055882855767, rel=1e-14)

    @pytest.mark.parametrize("t", [1e-6, 5e-4, 9.99e-4, 1.001e-3, 0.02])
    def test_both_branches_match_high_precision(self, t):
        mp.mp.dps = 50
        T = mp.mpf(t)
        assert psi(t) == pytest.approx(float(mp.e**-T + T - 1), rel=1e-13)
        assert upsilon(t) == pytest.approx(float(T**2 / 2 - mp.e**-T - T + 1), rel=1e-12)


class TestFirstOrderZoh:
    def test_lag_decay_entry(self):
        m = make_first_order_zoh(0.01, 0.2, 0.3)
        assert m.F[2, 2] == pytest.approx(0.951229424500714, rel=1e-14)

    def test_matches_matrix_exponential(self):
        # continuous model: xi' = xi_dot, xi_dot' = a_T - a_M, a' = (u - a) / tau
        dt, tM, tT = 0.05, 0.2, 0.4
        A = np.zeros((4, 4))
        A[0, 1] = 1.0
        A[1, 2], A[1, 3] = -1.0, 1.0
        A[2, 2], A[3, 3] = -1.0 / tM, -1.0 / tT
        B = np.zeros((4, 2))
        B[2, 0], B[3, 1] = 1.0 / tM, 1.0 / tT
        aug = np.zeros((6, 6))
        aug[:4, :4], aug[:4, 4:] = A * dt, B * dt
        E = _expm(aug)
        m = make_first_order_zoh(dt, tM, tT)
        np.testing.assert_allclose(m.F, E[:4, :4], atol=1e-13)
        np.testing.assert_allclose(m.g_M, E[:4, 4], atol=1e-13)
        np.testing.assert_allclose(m.g_T, E[:4, 5], atol=1e-13)

    def test_tiny_step_is_identity(self):
        m = make_first_order_zoh(1e-8, 0.2, 0.3)
        np.testing.assert_allclose(m.F, np.eye(4), atol=1e-6)
        np.testing.assert_allclose(m.g_T, 0.0, atol=1e-6)
        np.testing.assert_allclose(m.g_M, 0.0, atol=1e-6)

    @pytest.mark.parametrize("tau", [(0.0, 0.2), (0.2, -1.0)])
    def test_rejects_bad_time_constants(self, tau):
        with pytest.raises(ValueError):
            make_first_order_zoh(0.01, *tau)


def _expm(M, terms=40):
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


class TestStep:
    def setup_method(self):
        self.m = make_double_integrator(0.01)

    def test_stationary(self):
        np.testing.assert_array_equal(step(self.m, [1.0, 0.0], 0.0, 0.0), [1.0, 0.0])

    def test_constant_velocity(self):
        np.testing.assert_allclose(step(self.m, [0.0, 1.0], 0.0, 0.0), [0.01, 1.0])

    def test_input_column(self):
        np.testing.assert_allclose(step(self.m, [0.0, 0.0], 1.0, 0.0), [5e-5, 0.01])

    def test_noise_is_added(self):
        np.testing.assert_allclose(step(self.m, [0.0, 0.0], 0.0, 0.0, [1.0, 2.0]), [1.0, 2.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            step(self.m, [0.0, 0.0, 0.0], 0.0, 0.0)
        with pytest.raises(ValueError):
            step(self.m, [0.0, 0.0], 0.0, 0.0, [1.0])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=10, max_size=10))
    def test_superposition(self, v):
        m = make_first_order_zoh(0.01, 0.2, 0.3)
        x1, x2 = np.array(v[:4]), np.array(v[4:8])
        u1, u2 = v[8], v[9]
        lhs = step(m, x1 + x2, u1 + u2, u2 - u1)
        rhs = step(m, x1, u1, -u1) + step(m, x2, u2, u2)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(lhs).max()))


def test_make_state_rejects_non_finite():
    with pytest.raises(ValueError):
        make_state(1.0, float("nan"))
    np.testing.assert_array_equal(make_state(1.0, 2.0, 3.0, 4.0), [1, 2, 3, 4])


def test_batch_matvec_matches_matmul(rng):
    A = rng.standard_normal((3, 3))
    X = rng.standard_normal((7, 3))
    np.testing.assert_allclose(batch_matvec(A, X), X @ A.T, rtol=1e-13)


def test_batch_matvec_independent_of_batch(rng):
    A = rng.standard_normal((2, 2))
    X = rng.standard_normal((64, 2))
    full = batch_matvec(A, X)
    for b in range(0, 64, 8):
        np.testing.assert_array_equal(batch_matvec(A, X[b:b + 8]), full[b:b + 8])


class TestClosedLoop:
    def test_pn_unit_tgo(self):
        m = make_double_integrator(0.01)
        M = closed_loop_matrix(m, GuidanceMode(nav_gain=3.0), 1.0)
        # pursuer gain enters with the relative-coordinate sign
        expected = [[1 - 3 * 5e-5, 0.01 - 3 * 5e-5], [-0.03, 1 - 0.03]]
        np.testing.assert_allclose(M, expected, rtol=1e-14)

    def test_zero_gain_is_open_loop(self):
        m = make_double_integrator(0.01)
        np.testing.assert_array_equal(closed_loop_matrix(m, GuidanceMode(nav_gain=0.0), 0.5), m.F)

    @pytest.mark.parametrize("t_go", [0.0, 0.005])
    def test_rejects_tgo_below_floor(self, t_go):
        with pytest.raises(ValueError):
            closed_loop_matrix(make_double_integrator(0.01), GuidanceMode(), t_go)

    def test_floor_is_admissible(self):
        closed_loop_matrix(make_double_integrator(0.01), GuidanceMode(), 0.01)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 10.0), st.floats(-100.0, 100.0))
    def test_no_command_on_collision_triangle(self, t_go, xi):
        m = make_double_integrator(0.01)
        x = np.array([xi, -xi / t_go])
        M = closed_loop_matrix(m, GuidanceMode(nav_gain=3.0), t_go)
        np.testing.assert_allclose(M @ x, m.F @ x, atol=1e-12 * (1 + abs(xi)))


class TestGeometry:
    def test_head_on_final_time(self):
        geom = EngagementGeometry(rho0=1200.0, V_M=250.0, V_T=150.0)
        assert approx_final_time(geom) == pytest.approx(3.0, rel=1e-15)

    def test_zero_range(self):
        assert approx_final_time(EngagementGeometry(0.0, 250.0, 150.0)) == 0.0

    def test_receding_geometry(self):
        geom = EngagementGeometry(1000.0, 100.0, 300.0, gamma_T0=math.pi)
        with pytest.raises(ValueError):
            approx_final_time(geom)

    def test_rejects_bad_speed(self):
        with pytest.raises(ValueError):
            EngagementGeometry(1000.0, 0.0, 100.0)


class TestUncertainParams:
    def test_point_mass(self, rng):
        up = UncertainParams.point(tau_M=0.2)
        assert up.sample(rng) == {"tau_M": 0.2}

    def test_samples_within_bounds(self, rng):
        up = UncertainParams({"tau_M": (0.1, 0.3), "N": (3.0, 4.0)})
        for _ in range(200):
            assert up.contains(up.sample(rng))

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            UncertainParams({"tau_M": (0.3, 0.1)})
