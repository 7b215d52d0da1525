import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evasim.dynamics import G0
from evasim.guidance import (
    GuidanceLaw,
    GuidanceMode,
    ModeBelief,
    feedback_gain,
    guidance_command,
    mixture_command_estimate,
    zem,
)
from evasim.terminal_time import TerminalPmf, TimeToGoPmf, tgo_pmf

PN3 = GuidanceMode(GuidanceLaw.PN, 3.0)


class TestZem:
    def test_pn_at_zero_tgo(self):
        assert zem(PN3, [4.0, -7.0], 0.0) == 4.0

    def test_apn(self):
        mode = GuidanceMode(GuidanceLaw.APN, 3.0)
        assert zem(mode, [0.0, 0.0, 5.0, 19.6133], 2.0) == pytest.approx(39.2266, rel=1e-14)

    def test_ogl(self):
        mode = GuidanceMode(GuidanceLaw.OGL, 3.0, tau_M=0.2)
        assert zem(mode, [0.0, 0.0, 10.0, 0.0], 1.0) == pytest.approx(-1.6026951787996344, rel=1e-13)

    def test_lqdg_uses_evader_lag(self):
        mode = GuidanceMode(GuidanceLaw.LQDG, 3.0, tau_M=0.2, tau_T=0.5)
        # tau_T^2 psi(t_go / tau_T) with t_go = 1: 0.25 (e^-2 + 1)
        expected = 0.25 * (np.exp(-2.0) + 1.0) * 4.0
        assert zem(mode, [0.0, 0.0, 0.0, 4.0], 1.0) == pytest.approx(expected, rel=1e-13)

    def test_lag_laws_need_four_states(self):
        with pytest.raises(ValueError):
            zem(GuidanceMode(GuidanceLaw.APN), [1.0, 2.0], 1.0)

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            GuidanceMode(GuidanceLaw.OGL, 3.0)
        with pytest.raises(ValueError):
            GuidanceMode(GuidanceLaw.LQDG, 3.0, tau_M=0.2)
        with pytest.raises(ValueError):
            GuidanceMode(nav_gain=-1.0)


class TestCommand:
    def test_unbounded(self):
        assert guidance_command(PN3, [10.0, 0.0], 1.0) == 30.0

    def test_collision_course(self):
        assert guidance_command(PN3, [0.0, 0.0], 1.0) == 0.0

    def test_saturation(self):
        u = guidance_command(PN3, [100.0, 0.0], 0.1, u_max=27 * G0)
        assert u == pytest.approx(264.77955, rel=1e-14)
        assert guidance_command(PN3, [-100.0, 0.0], 0.1, u_max=27 * G0) == -u

    def test_below_floor(self):
        with pytest.raises(ValueError):
            guidance_command(PN3, [1.0, 0.0], 0.005, t_go_min=0.01)
        with pytest.raises(ValueError):
            guidance_command(PN3, [1.0, 0.0], 0.0)

    def test_gain_schedule(self):
        mode = GuidanceMode(GuidanceLaw.PN, 3.0, gain_schedule=lambda t: 3.0 + t)
        assert guidance_command(mode, [1.0, 0.0], 1.0) == 4.0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 5.0), st.floats(0.01, 10.0))
    def test_positively_homogeneous(self, x1, x2, t_go, alpha):
        base = guidance_command(PN3, [x1, x2], t_go)
        scaled = guidance_command(PN3, [alpha * x1, alpha * x2], t_go)
        assert scaled == pytest.approx(alpha * base, rel=1e-12, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-100, 100), st.floats(0.01, 5.0))
    def test_zero_on_collision_triangle(self, xi, t_go):
        assert guidance_command(PN3, [xi, -xi / t_go], t_go) == pytest.approx(0.0, abs=1e-9)

    def test_feedback_gain(self):
        np.testing.assert_allclose(feedback_gain(PN3, 1.0, 2), [3.0, 3.0])


class TestMixture:
    def setup_method(self):
        self.point = TimeToGoPmf(TerminalPmf.point(100), 0.01)

    def test_single_mode_averages_over_tgo(self, rng):
        x = rng.standard_normal(2)
        tgo = tgo_pmf(TerminalPmf.uniform(295, 305), 200, 0.01)
        expected = np.mean([guidance_command(PN3, x, t) for t in tgo.values])
        got = mixture_command_estimate(ModeBelief.certain(), [x], [PN3], tgo)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_convex_combination(self):
        x = np.array([2.0, 0.5])
        belief = ModeBelief((0.5, 0.5))
        modes = [PN3, GuidanceMode(nav_gain=4.0)]
        got = mixture_command_estimate(belief, [x, x], modes, self.point)
        assert got == pytest.approx(3.5 * (2.0 + 0.5) / 1.0, rel=1e-14)

    def test_one_hot_matches_single_mode(self, rng):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        modes = [PN3, GuidanceMode(nav_gain=5.0)]
        got = mixture_command_estimate(ModeBelief((0.0, 1.0)), [x, y], modes, self.point)
        assert abs(got - guidance_command(modes[1], y, 1.0)) <= 1e-12

    def test_zero_tgo_atom_is_floored(self):
        tgo = tgo_pmf(TerminalPmf.point(300), 300, 0.01)
        got = mixture_command_estimate(ModeBelief.certain(), [[1e-3, 0.0]], [PN3], tgo)
        assert got == pytest.approx(3 * 1e-3 / 1e-4)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mixture_command_estimate(ModeBelief.certain(), [[0, 0], [0, 0]], [PN3], self.point)

    def test_invalid_belief(self):
        with pytest.raises(ValueError):
            ModeBelief((0.5, 0.4))
