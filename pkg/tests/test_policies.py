import math

import numpy as np
import pytest

from evasim.dynamics import make_double_integrator
from evasim.guidance import GuidanceMode, ModeBelief
from evasim.policies import (
    NonePolicy,
    RtsPolicy,
    RtsState,
    SingerPolicy,
    TsePolicy,
    WeavingPolicy,
    rts_next,
    singer_next,
    weaving_next,
)
from evasim.terminal_time import TerminalPmf

U = 88.25985


class TestRts:
    def test_constant_between_epochs(self, rng):
        state = RtsState(1.0, 0.5, 1.0)
        out = [rts_next(state, t, U, rng) for t in np.arange(0, 0.5, 0.01)]
        assert set(out) == {U}

    def test_flips_at_epoch(self, rng):
        state = RtsState(1.0, 0.5, 1e-9)
        assert rts_next(state, 0.49, U, rng) == U
        assert rts_next(state, 0.5, U, rng) == -U

    def test_interval_mean(self):
        rng = np.random.default_rng(3)
        state = RtsState.start(1 / 3, rng)
        epochs = [state.next_switch]
        while len(epochs) < 100_000:
            rts_next(state, state.next_switch, 1.0, rng)
            epochs.append(state.next_switch)
        assert np.mean(np.diff(epochs)) == pytest.approx(3.0, abs=0.05)

    def test_only_bounds(self, rng):
        table = _table(RtsPolicy(U, 0.01, 2.0), 20, 400)
        assert set(np.unique(table)) <= {-U, U}

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            RtsState(1.0, 0.0, 0.0)


class TestSinger:
    def test_zero_sigma_decays(self):
        a = singer_next(10.0, 0.1, 1.0, 0.0, U, noise=0.7)
        assert a == pytest.approx(10.0 * math.exp(-0.1), rel=1e-15)

    def test_stationary_variance_and_autocorrelation(self):
        rng = np.random.default_rng(11)
        n, dt, tau, sig = 1_000_000, 0.01, 1.0, 2.0
        noise = rng.standard_normal(n)
        a = np.empty(n)
        a[0] = sig * rng.standard_normal()
        for k in range(1, n):
            a[k] = singer_next(a[k - 1], dt, tau, sig, 1e9, noise=noise[k])
        assert a.var() == pytest.approx(sig**2, rel=0.03)
        r1 = np.corrcoef(a[:-1], a[1:])[0, 1]
        assert r1 == pytest.approx(math.exp(-dt / tau), abs=0.01)

    def test_state_is_clamped(self):
        assert singer_next(U, 0.01, 1.0, 1e6, U, noise=5.0) == U

    def test_batch_matches_scalar_sequence(self):
        pol = SingerPolicy(U, 0.01)
        seeds = [np.random.default_rng(s) for s in range(6)]
        pol.start(seeds, 300)
        for b, s in enumerate(range(6)):
            np.testing.assert_array_equal(pol._table[b], pol._sequence(np.random.default_rng(s), 300))

    def test_rejects_bad_tau(self, rng):
        with pytest.raises(ValueError):
            singer_next(0.0, 0.01, 0.0, 1.0, U, rng)


class TestWeaving:
    def test_reference_profile(self):
        assert weaving_next(0.0, U, math.pi, math.pi / 2) == U
        assert weaving_next(1.0, U, math.pi, math.pi / 2) == pytest.approx(-U, rel=1e-14)

    def test_period(self):
        t = np.linspace(0, 3, 31)
        np.testing.assert_allclose(weaving_next(t + 2.0, 1.0, math.pi, 0.3), weaving_next(t, 1.0, math.pi, 0.3),
                                   atol=1e-12)

    def test_amplitude_bound(self):
        with pytest.raises(ValueError):
            WeavingPolicy(U, 0.01, amplitude=2 * U)


def _table(pol, B, n_steps, seed=0):
    pol.start([np.random.default_rng((seed, b)) for b in range(B)], n_steps)
    return np.column_stack([pol.command(k, np.zeros((B, 2))) for k in range(n_steps)])


@pytest.mark.parametrize("make", [
    lambda: RtsPolicy(U, 0.01), lambda: SingerPolicy(U, 0.01), lambda: WeavingPolicy(U, 0.01),
    lambda: NonePolicy(U, 0.01),
])
def test_commands_bounded_and_reproducible(make):
    a = _table(make(), 8, 305)
    b = _table(make(), 8, 305)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) <= U)


class TestTse:
    def test_bang_bang_and_mean_driven(self):
        pol = TsePolicy(U, make_double_integrator(0.01), [GuidanceMode()], ModeBelief.certain(),
                        TerminalPmf.uniform(295, 305))
        pol.start([None] * 3, 305)
        means = np.array([[5.0, 0.0], [-5.0, 0.0], [0.0, 0.0]])
        u = pol.command(0, means)
        assert set(np.abs(u)) == {U}
        assert u[0] == -u[1]
        assert u[2] == U
