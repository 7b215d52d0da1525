"""Evasion policies: terminal-set evasion and the stochastic baselines.

Scalar step functions (:func:`rts_next`, :func:`singer_next`,
:func:`weaving_next`) describe each model.  The ``*Policy`` classes drive a
batch of Monte Carlo trials at once: ``start`` draws per-trial randomness
from each trial's own stream so a trial's commands never depend on which
other trials share its batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import DynamicsModel
from .guidance import GuidanceMode, ModeBelief
from .terminal_time import TerminalPmf
from .tse import FutureInputModel, TerminalSetBuilder

__all__ = [
    "EvasionPolicy",
    "NonePolicy",
    "RtsPolicy",
    "RtsState",
    "SingerPolicy",
    "TsePolicy",
    "WeavingPolicy",
    "POLICY_NAMES",
    "rts_next",
    "singer_next",
    "weaving_next",
]


# -- scalar models ------------------------------------------------------------

@dataclass
class RtsState:
    """Random-telegraph state: current sign and the epoch of the next flip."""

    sign: float
    next_switch: float
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("switching rate must be positive")

    @classmethod
    def start(cls, rate: float, rng: np.random.Generator) -> "RtsState":
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return cls(sign, float(rng.exponential(1.0 / rate)), rate)


def rts_next(state: RtsState, t: float, u_max: float, rng: np.random.Generator) -> float:
    """Command at time ``t``, flipping once for each switch epoch passed."""
    while t >= state.next_switch:
        state.sign = -state.sign
        state.next_switch += float(rng.exponential(1.0 / state.rate))
    return state.sign * u_max


def singer_next(a, dt: float, tau: float, sigma_a: float, u_max: float, rng=None, noise=None):
    """Exact Ornstein-Uhlenbeck step, clamped to ``+-u_max``.

    ``noise`` supplies standard-normal draws directly (same shape as ``a``);
    otherwise they are taken from ``rng``.
    """
    if not tau > 0:
        raise ValueError("Singer time constant must be positive")
    phi = math.exp(-dt / tau)
    sd = sigma_a * math.sqrt(-math.expm1(-2.0 * dt / tau))
    if noise is None:
        if rng is None:
            raise ValueError("singer_next needs an rng or explicit noise")
        noise = rng.standard_normal(np.shape(a)) if np.ndim(a) else rng.standard_normal()
    out = np.clip(phi * np.asarray(a, dtype=float) + sd * np.asarray(noise), -u_max, u_max)
    return float(out) if out.ndim == 0 else out


def weaving_next(t, amplitude: float, omega: float, phase: float):
    """Sinusoidal weave ``amplitude * sin(omega t + phase)``."""
    return amplitude * np.sin(omega * np.asarray(t, dtype=float) + phase)


# -- batch policies -----------------------------------------------------------

class EvasionPolicy:
    """Base class for batch evasion policies.

    Subclasses either precompute a (B, n_steps) command table in ``start`` or
    compute commands from the evader's posterior mean in ``command``.
    """

    name = "base"

    def __init__(self, u_max: float, dt: float):
        self.u_max = float(u_max)
        self.dt = float(dt)
        self._table: np.ndarray | None = None

    def start(self, rngs: Sequence[np.random.Generator], n_steps: int) -> None:
        self._table = np.vstack([self._sequence(r, n_steps) for r in rngs]) if rngs else None

    def _sequence(self, rng: np.random.Generator, n_steps: int) -> np.ndarray:
        raise NotImplementedError

    def command(self, k: int, est_mean: np.ndarray) -> np.ndarray:
        return self._table[:, k]


class NonePolicy(EvasionPolicy):
    """Non-maneuvering evader."""

    name = "none"

    def _sequence(self, rng, n_steps):
        return np.zeros(n_steps)


class RtsPolicy(EvasionPolicy):
    name = "rts"

    def __init__(self, u_max: float, dt: float, rate: float = 1.0 / 3.0):
        super().__init__(u_max, dt)
        if not rate > 0:
            raise ValueError("switching rate must be positive")
        self.rate = rate

    def _sequence(self, rng, n_steps):
        state = RtsState.start(self.rate, rng)
        return np.array([rts_next(state, k * self.dt, self.u_max, rng) for k in range(n_steps)])


class SingerPolicy(EvasionPolicy):
    name = "singer"

    def __init__(self, u_max: float, dt: float, tau: float = 1.0, sigma_a: float | None = None):
        super().__init__(u_max, dt)
        if not tau > 0:
            raise ValueError("Singer time constant must be positive")
        self.tau = tau
        self.sigma_a = u_max / 2.0 if sigma_a is None else float(sigma_a)

    def _draws(self, rng, n_steps):
        a0 = float(np.clip(self.sigma_a * rng.standard_normal(), -self.u_max, self.u_max))
        return a0, rng.standard_normal(n_steps)

    def _sequence(self, rng, n_steps):
        a, noise = self._draws(rng, n_steps)
        out = np.empty(n_steps)
        for k in range(n_steps):
            out[k] = a
            a = singer_next(a, self.dt, self.tau, self.sigma_a, self.u_max, noise=noise[k])
        return out

    def start(self, rngs, n_steps):
        # same draws as _sequence, with the recurrence run across the batch
        draws = [self._draws(r, n_steps) for r in rngs]
        a = np.array([d[0] for d in draws])
        noise = np.array([d[1] for d in draws]).reshape(len(draws), n_steps)
        table = np.empty((len(draws), n_steps))
        for k in range(n_steps):
            table[:, k] = a
            a = singer_next(a, self.dt, self.tau, self.sigma_a, self.u_max, noise=noise[:, k])
        self._table = table


class WeavingPolicy(EvasionPolicy):
    name = "weaving"

    def __init__(self, u_max: float, dt: float, amplitude: float | None = None,
                 omega: float = math.pi, phase: float = math.pi / 2):
        super().__init__(u_max, dt)
        self.amplitude = u_max if amplitude is None else float(amplitude)
        if abs(self.amplitude) > u_max:
            raise ValueError("weave amplitude exceeds the command bound")
        self.omega = omega
        self.phase = phase

    def _sequence(self, rng, n_steps):
        return weaving_next(np.arange(n_steps) * self.dt, self.amplitude, self.omega, self.phase)


class TsePolicy(EvasionPolicy):
    """Terminal-set evasion from the evader's posterior mean.

    The shaping value is linear in the mean, so its coefficients are
    computed once per step and applied to every trial in the batch.
    """

    name = "tse"

    def __init__(
        self,
        u_max: float,
        model: DynamicsModel,
        modes: Sequence[GuidanceMode],
        belief: ModeBelief,
        pf: TerminalPmf,
        Q=None,
        C=None,
        future: FutureInputModel | None = None,
    ):
        super().__init__(u_max, model.dt)
        self.belief = belief
        self.builder = TerminalSetBuilder(
            model, modes, pf, Q, C, future or FutureInputModel.uniform(u_max)
        )

    def start(self, rngs, n_steps):
        self._n = len(rngs)

    def command(self, k: int, est_mean: np.ndarray) -> np.ndarray:
        s, s0 = self.builder.shaping_coefficients(self.belief, k)
        S = s0
        for c in range(s.size):
            S = S + s[c] * est_mean[:, c]
        S = np.broadcast_to(S, (est_mean.shape[0],))
        return np.where(S >= 0.0, self.u_max, -self.u_max)


POLICY_NAMES = ("tse", "rts", "singer", "weaving", "none")
