"""Seeded Monte Carlo engagement trials and miss-distance statistics.

Trials are simulated in batches with elementwise arithmetic only, and every
trial draws from its own seed stream derived from ``(master_seed, index)``.
A trial's miss therefore does not depend on the batch it ran in, the worker
that ran it, or the order of execution.  Within a trial, all policies share
the same exogenous draws (initial state, estimate errors, terminal index,
process and measurement noise).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import G0, batch_matvec, make_double_integrator
from .estimation import MeasurementModel, meas_noise_var
from .guidance import GuidanceMode, ModeBelief, feedback_gain
from .policies import (
    POLICY_NAMES,
    EvasionPolicy,
    NonePolicy,
    RtsPolicy,
    SingerPolicy,
    TsePolicy,
    WeavingPolicy,
)
from .terminal_time import TerminalPmf, tgo_pmf
from .tse import FutureInputModel

__all__ = [
    "McSummary",
    "MissStats",
    "TrialConfig",
    "TrialResult",
    "empirical_cdf",
    "make_policy",
    "run_mc",
    "run_trial",
    "simulate",
    "sskp",
    "summarize",
    "trial_streams",
]

TGO_RULES = ("conditional", "nominal")


@dataclass(frozen=True)
class TrialConfig:
    """Engagement, sensing and policy parameters of one Monte Carlo study.

    Accelerations are in m/s^2.  ``pursuer_tgo`` selects the time-to-go the
    pursuer feeds to PN: ``"conditional"`` is the mean of the time-to-go PMF
    given that the engagement is still running, ``"nominal"`` is
    ``(f_bar - k) dt``; both are floored at one step.
    """

    dt: float = 0.01
    Vc: float = 400.0
    nav_gain: float = 3.0
    u_T_max: float = 9.0 * G0
    u_M_max: float = 27.0 * G0
    pf: TerminalPmf = field(default_factory=lambda: TerminalPmf.uniform(295, 305))
    P0_diag: tuple[float, float] = (100.0, 4.0)
    sigma_lambda: float = 0.005
    beta: float = 0.25
    process_noise: bool = True
    pursuer_tgo: str = "conditional"
    future_input: str = "uniform"
    tse_modes: tuple[float, ...] | None = None
    tse_belief: tuple[float, ...] | None = None
    rts_rate: float = 1.0 / 3.0
    singer_tau: float = 1.0
    singer_sigma: float | None = None
    weave_amplitude: float | None = None
    weave_omega: float = math.pi
    weave_phase: float = math.pi / 2
    sskp_radius: float = 1.0

    def __post_init__(self):
        positive = ("dt", "Vc", "u_T_max", "u_M_max", "sigma_lambda", "beta", "sskp_radius")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.nav_gain < 0:
            raise ValueError("nav_gain must be non-negative")
        if len(self.P0_diag) != 2 or min(self.P0_diag) < 0:
            raise ValueError("P0_diag must hold two non-negative variances")
        if self.pursuer_tgo not in TGO_RULES:
            raise ValueError(f"pursuer_tgo must be one of {TGO_RULES}, got {self.pursuer_tgo!r}")
        FutureInputModel.from_name(self.future_input, self.u_T_max)
        if self.tse_belief is not None and self.tse_modes is None:
            raise ValueError("tse_belief needs tse_modes")
        if self.tse_modes is not None:
            belief = self.tse_belief or (1.0 / len(self.tse_modes),) * len(self.tse_modes)
            if len(belief) != len(self.tse_modes):
                raise ValueError("tse_belief and tse_modes lengths differ")
            ModeBelief(tuple(belief))

    @property
    def f_bar(self) -> float:
        return self.pf.mean()

    @property
    def n_steps(self) -> int:
        return self.pf.positive()[-1][0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pf"] = self.pf.to_config()
        d["P0_diag"] = list(self.P0_diag)
        for key in ("tse_modes", "tse_belief"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


@dataclass
class TrialResult:
    """Outcome of one trial; ``trace`` holds per-step arrays when requested."""

    miss: float
    f: int
    trace: dict[str, np.ndarray] | None = None


@dataclass(frozen=True)
class MissStats:
    n: int
    mean: float
    median: float
    p5: float
    p20: float
    p80: float
    p95: float


@dataclass
class McSummary:
    policy: str
    stats: MissStats
    sskp: float
    radius: float
    misses: np.ndarray

    def cdf(self) -> list[tuple[float, float]]:
        return empirical_cdf(self.misses)


# -- statistics ---------------------------------------------------------------

def summarize(misses) -> MissStats:
    """Mean, median and linearly interpolated percentiles."""
    m = np.asarray(misses, dtype=float).reshape(-1)
    if m.size == 0:
        raise ValueError("cannot summarize an empty sample")
    p5, p20, p50, p80, p95 = np.percentile(m, [5, 20, 50, 80, 95])
    return MissStats(int(m.size), float(m.mean()), float(p50), float(p5), float(p20), float(p80), float(p95))


def sskp(misses, radius: float) -> float:
    """Fraction of misses strictly inside ``radius``."""
    if not radius > 0:
        raise ValueError("lethality radius must be positive")
    m = np.asarray(misses, dtype=float)
    return float(np.count_nonzero(m < radius)) / m.size


def empirical_cdf(misses) -> list[tuple[float, float]]:
    """Right-continuous step CDF at each distinct value."""
    m = np.sort(np.asarray(misses, dtype=float).reshape(-1))
    if m.size == 0:
        raise ValueError("cannot build a CDF from an empty sample")
    values, counts = np.unique(m, return_counts=True)
    frac = np.cumsum(counts) / m.size
    return [(float(v), float(p)) for v, p in zip(values, frac)]


# -- seeding and exogenous draws ---------------------------------------------

def trial_streams(master_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Exogenous and policy generators of trial ``index``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    exo, pol = ss.spawn(2)
    return np.random.default_rng(exo), np.random.default_rng(pol)


@dataclass
class _Exogenous:
    x0: np.ndarray  # (B, 2)
    e_T: np.ndarray
    e_M: np.ndarray
    f: np.ndarray  # (B,)
    w: np.ndarray  # (B, K) standard normals for process noise
    v_T: np.ndarray  # (B, K) evader measurement noise
    v_M: np.ndarray  # (B, K) pursuer measurement noise


def _draw_exogenous(cfg: TrialConfig, rngs: Sequence[np.random.Generator]) -> _Exogenous:
    K = cfg.n_steps
    sd0 = np.sqrt(np.asarray(cfg.P0_diag, dtype=float))
    support = np.asarray(cfg.pf.support)
    cdf = np.cumsum(cfg.pf.probs)
    last = cfg.n_steps
    rows = {k: [] for k in ("x0", "e_T", "e_M", "f", "w", "v_T", "v_M")}
    for rng in rngs:
        rows["x0"].append(sd0 * rng.standard_normal(2))
        rows["e_T"].append(sd0 * rng.standard_normal(2))
        rows["e_M"].append(math.sqrt(cfg.beta) * sd0 * rng.standard_normal(2))
        j = int(np.searchsorted(cdf, rng.random(), side="right"))
        rows["f"].append(support[j] if j < support.size else last)
        rows["w"].append(rng.standard_normal(K))
        rows["v_T"].append(rng.standard_normal(K))
        rows["v_M"].append(rng.standard_normal(K))
    return _Exogenous(*(np.array(rows[k]) for k in ("x0", "e_T", "e_M", "f", "w", "v_T", "v_M")))


# -- simulation ---------------------------------------------------------------

def make_policy(cfg: TrialConfig, name: str) -> EvasionPolicy:
    """Instantiate a batch evasion policy by name."""
    u, dt = cfg.u_T_max, cfg.dt
    if name == "tse":
        if cfg.tse_modes is None:
            modes = [GuidanceMode(nav_gain=cfg.nav_gain)]
            belief = ModeBelief.certain(1)
        else:
            modes = [GuidanceMode(nav_gain=g) for g in cfg.tse_modes]
            probs = cfg.tse_belief or (1.0 / len(modes),) * len(modes)
            belief = ModeBelief(tuple(probs))
        model = make_double_integrator(dt)
        return TsePolicy(
            u, model, modes, belief, cfg.pf, Q=_process_cov(cfg, model),
            future=FutureInputModel.from_name(cfg.future_input, u),
        )
    if name == "rts":
        return RtsPolicy(u, dt, cfg.rts_rate)
    if name == "singer":
        return SingerPolicy(u, dt, cfg.singer_tau, cfg.singer_sigma)
    if name == "weaving":
        return WeavingPolicy(u, dt, cfg.weave_amplitude, cfg.weave_omega, cfg.weave_phase)
    if name == "none":
        return NonePolicy(u, dt)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")


def _process_cov(cfg: TrialConfig, model) -> np.ndarray:
    return cfg.u_T_max**2 * np.outer(model.g_T, model.g_T)


def _pursuer_tgo(cfg: TrialConfig, k: int) -> float:
    if cfg.pursuer_tgo == "nominal":
        t = (cfg.f_bar - k) * cfg.dt
    else:
        t = tgo_pmf(cfg.pf, k, cfg.dt).mean()
    return max(t, cfg.dt)


def _kalman_gain(P: np.ndarray, C: np.ndarray, R: float):
    PCt = P @ C
    K = PCt / (float(C @ PCt) + R)
    A = np.eye(P.shape[0]) - np.outer(K, C)
    P_new = A @ P @ A.T + R * np.outer(K, K)
    return K, 0.5 * (P_new + P_new.T)


def simulate(
    cfg: TrialConfig,
    policy: str,
    master_seed: int,
    indices: Sequence[int],
    trace: bool = False,
) -> list[TrialResult]:
    """Simulate trials ``indices`` of the study seeded by ``master_seed``."""
    indices = list(indices)
    B = len(indices)
    if B == 0:
        return []
    streams = [trial_streams(master_seed, i) for i in indices]
    ex = _draw_exogenous(cfg, [s[0] for s in streams])
    pol = make_policy(cfg, policy)
    K = cfg.n_steps
    pol.start([s[1] for s in streams], K)

    model = make_double_integrator(cfg.dt)
    F, g_T, g_M = model.F, model.g_T, model.g_M
    Q = _process_cov(cfg, model)
    mm = MeasurementModel(cfg.sigma_lambda, cfg.Vc, cfg.f_bar, cfg.dt)
    C = mm.row
    mode = GuidanceMode(nav_gain=cfg.nav_gain)
    noise_gain = g_T * cfg.u_T_max if cfg.process_noise else np.zeros(2)

    x = ex.x0.copy()
    xe = x + ex.e_T
    xp = x + ex.e_M
    P_T = np.diag(np.asarray(cfg.P0_diag, dtype=float))
    P_M = cfg.beta * P_T
    miss = np.full(B, np.nan)
    done0 = ex.f == 0
    miss[done0] = np.abs(x[done0, 0])

    rec = {k: [] for k in ("xi", "xi_dot", "u_T", "u_M", "xi_hat_T", "xi_hat_M")} if trace else None
    means_T, covs_T = ([xe[0].copy()], [P_T.copy()]) if trace else (None, None)

    for k in range(K):
        t_go = _pursuer_tgo(cfg, k)
        Kfb = feedback_gain(mode, t_go, 2, t_go_min=cfg.dt)
        u_M = np.clip(Kfb[0] * xp[:, 0] + Kfb[1] * xp[:, 1], -cfg.u_M_max, cfg.u_M_max)
        u_T = np.asarray(pol.command(k, xe), dtype=float)
        if trace:
            rec["xi"].append(x[:, 0].copy())
            rec["xi_dot"].append(x[:, 1].copy())
            rec["u_T"].append(u_T.copy())
            rec["u_M"].append(u_M.copy())
            rec["xi_hat_T"].append(xe[:, 0].copy())
            rec["xi_hat_M"].append(xp[:, 0].copy())

        drive = np.outer(u_T, g_T) + np.outer(u_M, g_M)
        x = batch_matvec(F, x) + drive + np.outer(ex.w[:, k], noise_gain)
        xe = batch_matvec(F, xe) + drive
        xp = batch_matvec(F, xp) + drive
        P_T = F @ P_T @ F.T + Q
        P_M = F @ P_M @ F.T + Q

        R = meas_noise_var(mm, k + 1)
        sR = math.sqrt(R)
        y_T = x[:, 0] + sR * ex.v_T[:, k]
        y_M = x[:, 0] + sR * ex.v_M[:, k]
        G_T, P_T = _kalman_gain(P_T, C, R)
        G_M, P_M = _kalman_gain(P_M, C, R)
        xe = xe + np.outer(y_T - xe[:, 0], G_T)
        xp = xp + np.outer(y_M - xp[:, 0], G_M)
        if trace:
            means_T.append(xe[0].copy())
            covs_T.append(P_T.copy())

        hit = ex.f == k + 1
        miss[hit] = np.abs(x[hit, 0])

    results = []
    for b in range(B):
        tr = None
        if trace:
            f = int(ex.f[b])
            tr = {key: np.array(v)[:f, b] for key, v in rec.items()}
            tr["k"] = np.arange(f)
            tr["t"] = tr["k"] * cfg.dt
            if B == 1:
                tr["mean_T"] = np.array(means_T)
                tr["cov_T"] = np.array(covs_T)
        results.append(TrialResult(float(miss[b]), int(ex.f[b]), tr))
    return results


def run_trial(cfg: TrialConfig, seed: int, policy: str = "tse", trial_index: int = 0,
              trace: bool = False) -> TrialResult:
    """One trial; identical to trial ``trial_index`` of ``run_mc(cfg, ..., seed)``."""
    return simulate(cfg, policy, seed, [trial_index], trace=trace)[0]


def _chunk_misses(args) -> np.ndarray:
    cfg, policy, master_seed, lo, hi = args
    return np.array([r.miss for r in simulate(cfg, policy, master_seed, range(lo, hi))])


def run_mc(
    cfg: TrialConfig,
    n_trials: int,
    master_seed: int,
    policies: Sequence[str] = ("tse", "rts", "singer", "weaving"),
    workers: int = 1,
    chunk: int = 1000,
) -> dict[str, McSummary]:
    """Paired Monte Carlo study; returns a summary per policy in input order."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    for p in policies:
        if p not in POLICY_NAMES:
            raise ValueError(f"unknown policy {p!r}; choose from {', '.join(POLICY_NAMES)}")
    bounds = [(lo, min(lo + chunk, n_trials)) for lo in range(0, n_trials, chunk)]
    jobs = [(cfg, p, master_seed, lo, hi) for p in policies for lo, hi in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_misses, jobs))
    else:
        parts = [_chunk_misses(j) for j in jobs]
    out = {}
    per = len(bounds)
    for n, p in enumerate(policies):
        misses = np.concatenate(parts[n * per:(n + 1) * per])
        out[p] = McSummary(p, summarize(misses), sskp(misses, cfg.sskp_radius), cfg.sskp_radius, misses)
    return out
