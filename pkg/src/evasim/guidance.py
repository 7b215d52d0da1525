"""Linear pursuer guidance laws ``u_M = N * ZEM / t_go**2`` and mode mixtures."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ._lag import psi

__all__ = [
    "GuidanceLaw",
    "GuidanceMode",
    "ModeBelief",
    "feedback_gain",
    "guidance_command",
    "mixture_command_estimate",
    "zem",
    "zem_coefficients",
]


class GuidanceLaw(str, Enum):
    PN = "PN"
    APN = "APN"
    OGL = "OGL"
    LQDG = "LQDG"


# Index of the lag states in the four-state model.
_A_M, _A_T = 2, 3


@dataclass(frozen=True)
class GuidanceMode:
    """One candidate pursuer law.

    ``gain_schedule`` maps t_go to the navigation gain for laws whose gain is
    time-varying (OGL, LQDG); when omitted the constant ``nav_gain`` is used.
    A zero gain describes a non-maneuvering pursuer.
    """

    law: GuidanceLaw = GuidanceLaw.PN
    nav_gain: float = 3.0
    tau_M: float | None = None
    tau_T: float | None = None
    gain_schedule: Callable[[float], float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "law", GuidanceLaw(self.law))
        if self.nav_gain < 0:
            raise ValueError("navigation gain must be non-negative")
        if self.law in (GuidanceLaw.OGL, GuidanceLaw.LQDG) and not (self.tau_M and self.tau_M > 0):
            raise ValueError(f"{self.law.value} needs a positive tau_M")
        if self.law is GuidanceLaw.LQDG and not (self.tau_T and self.tau_T > 0):
            raise ValueError("LQDG needs a positive tau_T")

    @property
    def min_dim(self) -> int:
        return 2 if self.law is GuidanceLaw.PN else 4

    def gain(self, t_go: float) -> float:
        if self.gain_schedule is not None:
            return float(self.gain_schedule(t_go))
        return self.nav_gain

    @property
    def label(self) -> str:
        return f"{self.law.value}{self.nav_gain:g}"


@dataclass(frozen=True)
class ModeBelief:
    """Probabilities over the candidate guidance modes."""

    probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("belief must be a non-empty sequence")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"mode probabilities must be >= 0 and sum to 1, got {p.sum()!r}")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    @classmethod
    def certain(cls, n_modes: int = 1, index: int = 0) -> "ModeBelief":
        p = [0.0] * n_modes
        p[index] = 1.0
        return cls(tuple(p))

    def __len__(self) -> int:
        return len(self.probs)


def zem_coefficients(mode: GuidanceMode, t_go: float, dim: int) -> np.ndarray:
    """Row ``c`` with ``ZEM = c @ x`` for the mode's zero-effort miss."""
    if dim < mode.min_dim:
        raise ValueError(f"{mode.law.value} needs the {mode.min_dim}-state model, got dim={dim}")
    c = np.zeros(dim)
    c[0] = 1.0
    c[1] = t_go
    if mode.law is GuidanceLaw.APN:
        c[_A_T] = 0.5 * t_go * t_go
    elif mode.law is GuidanceLaw.OGL:
        c[_A_M] = -(mode.tau_M**2) * psi(t_go / mode.tau_M)
        c[_A_T] = 0.5 * t_go * t_go
    elif mode.law is GuidanceLaw.LQDG:
        c[_A_M] = -(mode.tau_M**2) * psi(t_go / mode.tau_M)
        c[_A_T] = mode.tau_T**2 * psi(t_go / mode.tau_T)
    return c


def zem(mode: GuidanceMode, x, t_go: float) -> float:
    """Zero-effort miss (m) of state ``x`` under ``mode``."""
    x = np.asarray(x, dtype=float)
    return float(zem_coefficients(mode, t_go, x.shape[0]) @ x)


def _check_tgo(t_go: float, t_go_min: float) -> None:
    if not t_go > 0 or t_go < t_go_min * (1.0 - 1e-9):
        raise ValueError(f"t_go={t_go!r} is below the guidance floor {t_go_min!r}")


def feedback_gain(mode: GuidanceMode, t_go: float, dim: int, t_go_min: float = 0.0) -> np.ndarray:
    """State-feedback row ``K`` with ``u_M = K @ x`` (before saturation)."""
    _check_tgo(t_go, t_go_min)
    return mode.gain(t_go) * zem_coefficients(mode, t_go, dim) / (t_go * t_go)


def guidance_command(
    mode: GuidanceMode,
    x,
    t_go: float,
    u_max: float | None = None,
    t_go_min: float = 0.0,
) -> float:
    """Saturated pursuer command ``clamp(N * ZEM / t_go**2, +-u_max)``."""
    _check_tgo(t_go, t_go_min)
    u = mode.gain(t_go) * zem(mode, x, t_go) / (t_go * t_go)
    if u_max is not None:
        u = min(max(u, -u_max), u_max)
    return u


def mixture_command_estimate(
    belief: ModeBelief,
    mode_states: Sequence,
    modes: Sequence[GuidanceMode],
    tgo,
    u_max: float | None = None,
) -> float:
    """Evader-side expectation of the pursuer command.

    Averages the per-mode command, evaluated at each mode-conditioned mean,
    over the mode probabilities and the time-to-go distribution ``tgo``
    (a :class:`~evasim.terminal_time.TimeToGoPmf`).  The zero time-to-go atom
    is evaluated at the one-step floor.
    """
    if not (len(belief) == len(modes) == len(mode_states)):
        raise ValueError("belief, modes and mode_states must have equal length")
    dt = tgo.dt
    total = 0.0
    for P_j, mode, est in zip(belief.probs, modes, mode_states):
        if P_j == 0.0:
            continue
        mean = est.mean if hasattr(est, "cov") else est
        inner = 0.0
        for t_go, p in zip(tgo.values, tgo.probs):
            if p == 0.0:
                continue
            inner += p * guidance_command(mode, mean, max(t_go, dt), u_max, t_go_min=dt)
        total += P_j * inner
    return total
