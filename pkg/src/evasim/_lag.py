"""Closed-form helpers for first-order lag discretization."""

from __future__ import annotations

import math

# Below this argument the closed forms lose digits to cancellation.
_SERIES_CUTOFF = 1e-3


def psi(t: float) -> float:
    """Return ``exp(-t) + t - 1``."""
    if abs(t) < _SERIES_CUTOFF:
        return t * t / 2.0 - t**3 / 6.0 + t**4 / 24.0
    return math.expm1(-t) + t


def upsilon(t: float) -> float:
    """Return ``t**2 / 2 - exp(-t) - t + 1``."""
    if abs(t) < _SERIES_CUTOFF:
        return t**3 / 6.0 - t**4 / 24.0 + t**5 / 120.0
    return 0.5 * t * t - math.expm1(-t) - t
