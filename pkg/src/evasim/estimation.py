"""Linear Kalman filtering and propagation of the modeled pursuer information state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsModel

__all__ = [
    "GaussianEstimate",
    "MeasurementModel",
    "is_psd",
    "kf_predict",
    "kf_update",
    "meas_noise_var",
    "propagate_modeled_state",
]

_SYM_TOL = 1e-10
_PSD_TOL = 1e-10


def is_psd(M, tol: float = _PSD_TOL) -> bool:
    """True when ``M`` is symmetric and its smallest eigenvalue is >= -tol (scaled)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > _SYM_TOL * scale:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T)).min(initial=0.0) >= -tol * scale)


@dataclass(frozen=True)
class GaussianEstimate:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean size {mean.size}")
        if not is_psd(cov):
            raise ValueError("covariance must be symmetric positive semidefinite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class MeasurementModel:
    """Lateral-position measurement built from LOS-angle jitter.

    The noise standard deviation is ``sigma_lambda * Vc * t_go_nom`` with the
    nominal time-to-go taken from the mean terminal index ``f_bar``.
    """

    sigma_lambda: float
    Vc: float
    f_bar: float
    dt: float
    C: tuple[float, ...] = (1.0, 0.0)

    def __post_init__(self):
        if not self.sigma_lambda > 0:
            raise ValueError("sigma_lambda must be positive")
        if not self.Vc > 0:
            raise ValueError("closing speed must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "C", tuple(float(c) for c in self.C))

    @property
    def row(self) -> np.ndarray:
        return np.asarray(self.C)


def meas_noise_var(mm: MeasurementModel, k: int) -> float:
    """Measurement variance (m^2) at step ``k``.

    Floored at the one-step value so the update stays regular at and past the
    nominal intercept.
    """
    t_nom = (mm.f_bar - k) * mm.dt
    return (mm.sigma_lambda * mm.Vc * max(t_nom, mm.dt)) ** 2


def _symmetric(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _check_noise(Q, dim: int, name: str = "Q") -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (dim, dim):
        raise ValueError(f"{name} has shape {Q.shape}, expected ({dim}, {dim})")
    if not is_psd(Q):
        raise ValueError(f"{name} must be positive semidefinite")
    return Q


def kf_predict(est: GaussianEstimate, model: DynamicsModel, u_T: float, u_M: float, Q) -> GaussianEstimate:
    """Time update with both agents' applied commands known."""
    if est.dim != model.dim:
        raise ValueError("estimate and model dimensions differ")
    Q = _check_noise(Q, model.dim)
    F = model.F
    mean = F @ est.mean + model.g_T * u_T + model.g_M * u_M
    cov = _symmetric(F @ est.cov @ F.T + Q)
    return GaussianEstimate(mean, cov)


def kf_update(est: GaussianEstimate, y: float, C, R: float) -> GaussianEstimate:
    """Scalar measurement update with a Joseph-form covariance."""
    if not R > 0:
        raise ValueError(f"measurement variance must be positive, got {R!r}")
    C = np.asarray(C, dtype=float).reshape(-1)
    if C.size != est.dim:
        raise ValueError("output row does not match the state dimension")
    P = est.cov
    PCt = P @ C
    S = float(C @ PCt) + R
    K = PCt / S
    mean = est.mean + K * (y - float(C @ est.mean))
    A = np.eye(est.dim) - np.outer(K, C)
    cov = _symmetric(A @ P @ A.T + R * np.outer(K, K))
    return GaussianEstimate(mean, cov)


def propagate_modeled_state(
    est: GaussianEstimate, model: DynamicsModel, u_M_hat: float, u_T: float, Q_hat
) -> GaussianEstimate:
    """Propagate the evader's model of the pursuer's estimate.

    The same recursion as :func:`kf_predict`, driven by the evader's estimate
    of the pursuer command and the inflated noise ``Q_hat``.
    """
    if est.dim != model.dim:
        raise ValueError("estimate and model dimensions differ")
    Q_hat = _check_noise(Q_hat, model.dim, "Q_hat")
    F = model.F
    mean = F @ est.mean + model.g_T * u_T + model.g_M * u_M_hat
    cov = _symmetric(F @ est.cov @ F.T + Q_hat)
    return GaussianEstimate(mean, cov)
