"""Engagement state, discrete-time dynamics models and the closed-loop step.

The relative lateral state is ``[xi, xi_dot]`` optionally followed by the
pursuer and evader lateral accelerations (first-order lag model).  The
relative coordinate is evader minus pursuer, so pursuer acceleration enters
the relative dynamics with a negative sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._lag import psi, upsilon
from .guidance import GuidanceMode, feedback_gain

__all__ = [
    "G0",
    "DynamicsModel",
    "EngagementGeometry",
    "UncertainParams",
    "approx_final_time",
    "batch_matvec",
    "closed_loop_matrix",
    "make_double_integrator",
    "make_first_order_zoh",
    "make_state",
    "psi",
    "step",
    "upsilon",
]

#: Standard gravity used to convert "g" bounds to m/s^2.
G0 = 9.80665

StateVector = np.ndarray


def make_state(xi: float, xi_dot: float, *internal: float) -> StateVector:
    """Pack a relative state; ``internal`` holds lag states (a_M, then a_T)."""
    x = np.array([xi, xi_dot, *internal], dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("state entries must be finite")
    return x


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DynamicsModel:
    """Time-invariant model ``x+ = F x + g_T u_T + g_M u_M + w``.

    Attributes:
        F: (n, n) transition matrix.
        g_T: (n,) evader input gain.
        g_M: (n,) pursuer input gain.
        dt: Step size in seconds.
    """

    F: np.ndarray
    g_T: np.ndarray
    g_M: np.ndarray
    dt: float

    def __post_init__(self):
        F = _readonly(self.F)
        g_T = _readonly(self.g_T).reshape(-1)
        g_M = _readonly(self.g_M).reshape(-1)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ValueError(f"F must be square, got shape {F.shape}")
        n = F.shape[0]
        if g_T.shape != (n,) or g_M.shape != (n,):
            raise ValueError("input gains must have the state dimension")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        for arr in (F, g_T, g_M):
            arr.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "g_T", g_T)
        object.__setattr__(self, "g_M", g_M)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def dim(self) -> int:
        return self.F.shape[0]


def make_double_integrator(dt: float) -> DynamicsModel:
    """Lateral double integrator with zero-order-hold inputs.

    >>> m = make_double_integrator(1.0)
    >>> m.g_T.tolist(), m.g_M.tolist()
    ([0.5, 1.0], [-0.5, -1.0])
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    F = [[1.0, dt], [0.0, 1.0]]
    g = np.array([dt * dt / 2.0, dt])
    return DynamicsModel(F=F, g_T=g, g_M=-g, dt=dt)


def make_first_order_zoh(dt: float, tau_M: float, tau_T: float) -> DynamicsModel:
    """Four-state model with first-order lags on both agents' accelerations.

    State order is ``[xi, xi_dot, a_M, a_T]``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not (tau_M > 0 and tau_T > 0):
        raise ValueError("time constants must be positive")
    rM, rT = dt / tau_M, dt / tau_T
    eM, eT = math.exp(-rM), math.exp(-rT)
    F = [
        [1.0, dt, -(tau_M**2) * psi(rM), tau_T**2 * psi(rT)],
        [0.0, 1.0, tau_M * math.expm1(-rM), -tau_T * math.expm1(-rT)],
        [0.0, 0.0, eM, 0.0],
        [0.0, 0.0, 0.0, eT],
    ]
    g_M = [-(tau_M**2) * upsilon(rM), -tau_M * psi(rM), -math.expm1(-rM), 0.0]
    g_T = [tau_T**2 * upsilon(rT), tau_T * psi(rT), 0.0, -math.expm1(-rT)]
    return DynamicsModel(F=F, g_T=g_T, g_M=g_M, dt=dt)


def step(model: DynamicsModel, x, u_T: float, u_M: float, w=None) -> StateVector:
    """Advance one step: ``F x + g_T u_T + g_M u_M + w``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"state has shape {x.shape}, model needs ({model.dim},)")
    out = model.F @ x + model.g_T * u_T + model.g_M * u_M
    if w is not None:
        w = np.asarray(w, dtype=float)
        if w.shape != x.shape:
            raise ValueError("process noise must match the state dimension")
        out = out + w
    return out


def batch_matvec(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise ``A @ x`` for a (B, n) batch using only elementwise arithmetic.

    Results for a row never depend on the batch size, which keeps Monte Carlo
    output independent of how trials are chunked across workers.
    """
    A = np.asarray(A, dtype=float)
    out = np.empty((X.shape[0], A.shape[0]))
    for r in range(A.shape[0]):
        acc = A[r, 0] * X[:, 0]
        for c in range(1, A.shape[1]):
            acc = acc + A[r, c] * X[:, c]
        out[:, r] = acc
    return out


def closed_loop_matrix(model: DynamicsModel, mode: GuidanceMode, t_go: float) -> np.ndarray:
    """``F + g_M K(t_go)`` for a pursuer flying ``mode`` with exact feedback.

    Raises:
        ValueError: if ``t_go`` is below one step (the gain is singular at 0).
    """
    K = feedback_gain(mode, t_go, model.dim, t_go_min=model.dt)
    return model.F + np.outer(model.g_M, K)


@dataclass(frozen=True)
class EngagementGeometry:
    rho0: float
    V_M: float
    V_T: float
    gamma_M0: float = 0.0
    gamma_T0: float = 0.0
    lambda0: float = 0.0

    def __post_init__(self):
        if self.rho0 < 0:
            raise ValueError("initial range must be non-negative")
        if not (self.V_M > 0 and self.V_T > 0):
            raise ValueError("speeds must be positive")

    @property
    def closing_speed(self) -> float:
        return self.V_M * math.cos(self.gamma_M0 - self.lambda0) + self.V_T * math.cos(
            self.gamma_T0 + self.lambda0
        )


def approx_final_time(geom: EngagementGeometry) -> float:
    """Collision-course estimate of the engagement duration (s)."""
    vc = geom.closing_speed
    if vc <= 0:
        raise ValueError(f"geometry is not closing (closing speed {vc:.6g} m/s)")
    return geom.rho0 / vc


@dataclass(frozen=True)
class UncertainParams:
    """Uniform (or point-mass, when ``lo == hi``) uncertain parameters.

    Sampled once per trial and then held fixed.
    """

    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if hi < lo:
                raise ValueError(f"{name}: upper bound below lower bound")

    @classmethod
    def point(cls, **values: float) -> "UncertainParams":
        return cls({k: (v, v) for k, v in values.items()})

    def sample(self, rng: np.random.Generator) -> dict[str, float]:
        out = {}
        for name in sorted(self.bounds):
            lo, hi = self.bounds[name]
            out[name] = float(lo) if lo == hi else float(rng.uniform(lo, hi))
        return out

    def contains(self, values: Mapping[str, float]) -> bool:
        return all(self.bounds[k][0] <= v <= self.bounds[k][1] for k, v in values.items())
