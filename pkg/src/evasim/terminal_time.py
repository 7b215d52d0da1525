"""Distribution of the random terminal step index and derived time-to-go."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TerminalPmf",
    "TimeToGoPmf",
    "max_decision_step",
    "parse_pmf",
    "sample_terminal_index",
    "tgo_pmf",
]


@dataclass(frozen=True)
class TerminalPmf:
    """PMF over integer step indices with strictly increasing support."""

    support: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        probs = np.asarray(self.probs, dtype=float)
        if len(support) == 0:
            raise ValueError("terminal PMF has empty support")
        if probs.shape != (len(support),):
            raise ValueError("support and probs must have equal length")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValueError("support indices must be strictly increasing")
        if support[0] < 0:
            raise ValueError("step indices must be non-negative")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, expected 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", tuple(float(p) for p in probs))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "TerminalPmf":
        """Discrete uniform on ``lo..hi`` inclusive."""
        if hi < lo:
            raise ValueError("uniform PMF needs lo <= hi")
        n = hi - lo + 1
        return cls(tuple(range(lo, hi + 1)), (1.0 / n,) * n)

    @classmethod
    def point(cls, index: int) -> "TerminalPmf":
        return cls((index,), (1.0,))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "TerminalPmf":
        pairs = sorted((int(i), float(p)) for i, p in pairs)
        return cls(tuple(i for i, _ in pairs), tuple(p for _, p in pairs))

    def mean(self) -> float:
        return math.fsum(i * p for i, p in zip(self.support, self.probs))

    def positive(self) -> list[tuple[int, float]]:
        """Atoms with non-zero mass, in index order."""
        return [(i, p) for i, p in zip(self.support, self.probs) if p > 0]

    def to_config(self) -> list[list[float]]:
        return [[i, p] for i, p in zip(self.support, self.probs)]


@dataclass(frozen=True)
class TimeToGoPmf:
    """Time-to-go distribution: step counts ``steps`` scaled by ``dt``."""

    steps: TerminalPmf
    dt: float

    @property
    def values(self) -> np.ndarray:
        return self.dt * np.asarray(self.steps.support, dtype=float)

    @property
    def probs(self) -> np.ndarray:
        return np.asarray(self.steps.probs)

    def mean(self) -> float:
        return self.dt * self.steps.mean()


def max_decision_step(pf: TerminalPmf) -> int:
    """Largest step k that still has terminal mass at or after it."""
    atoms = pf.positive()
    if not atoms:
        raise ValueError("terminal PMF has no positive mass")
    return atoms[-1][0]


def tgo_pmf(pf: TerminalPmf, k: int, dt: float) -> TimeToGoPmf:
    """Time-to-go PMF at step ``k``, renormalized over indices ``i >= k``."""
    if k > max_decision_step(pf):
        raise ValueError(f"step {k} is past the last possible terminal index")
    idx = [(i - k, p) for i, p in zip(pf.support, pf.probs) if i >= k]
    if any(p > 0 for i, p in zip(pf.support, pf.probs) if i < k):
        mass = math.fsum(p for _, p in idx)
        probs = [p / mass for _, p in idx]
    else:
        # nothing can have ended yet: the shifted PMF is already normalized
        probs = [p for _, p in idx]
    return TimeToGoPmf(TerminalPmf(tuple(s for s, _ in idx), tuple(probs)), float(dt))


def sample_terminal_index(pf: TerminalPmf, rng: np.random.Generator) -> int:
    """Draw one terminal index by inverse CDF over the sorted support."""
    cdf = np.cumsum(pf.probs)
    j = int(np.searchsorted(cdf, rng.random(), side="right"))
    if j >= len(pf.support):
        # rounding left cdf[-1] a hair under 1; fall back to the last real atom
        return max_decision_step(pf)
    return pf.support[j]


_UNIFORM_RE = re.compile(r"^\s*uniform\s*\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*$", re.IGNORECASE)


def parse_pmf(value) -> TerminalPmf:
    """Build a PMF from ``"uniform(lo, hi)"`` or a list of ``[index, prob]`` pairs."""
    if isinstance(value, TerminalPmf):
        return value
    if isinstance(value, str):
        m = _UNIFORM_RE.match(value)
        if not m:
            raise ValueError(f"cannot parse terminal PMF {value!r}; expected 'uniform(lo, hi)'")
        return TerminalPmf.uniform(int(m.group(1)), int(m.group(2)))
    try:
        return TerminalPmf.from_pairs(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"cannot parse terminal PMF {value!r}: {exc}") from exc
