"""Brute-force checks of bang-bang optimality and of the terminal-set algebra.

Expected costs are evaluated analytically from terminal-set moments, so
comparisons between enumeration, grid search and the TSE selector are free
of sampling noise.  Commands beyond the enumerated horizon follow the
problem's future-input model, exactly as in the TSE selector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import DynamicsModel, make_double_integrator, step
from .estimation import GaussianEstimate
from .guidance import GuidanceMode, ModeBelief, feedback_gain
from .terminal_time import TerminalPmf
from .tse import FutureInputModel, ModePropagator, TerminalSet, _as_selector, transition_product

__all__ = [
    "BangBangResult",
    "OracleProblem",
    "affine_check",
    "enumerate_bang_bang",
    "grid_search",
    "random_problem",
    "random_terminal_set",
    "rollout_moments",
    "rollout_samples",
    "rollout_terminal",
]

#: Largest horizon accepted by :func:`enumerate_bang_bang`.
DEFAULT_HORIZON_CAP = 20


@dataclass
class OracleProblem:
    """Finite-horizon evasion problem at decision step ``n``.

    ``modes`` may contain ``None`` for an open-loop (non-guided) pursuer.
    """

    model: DynamicsModel
    modes: Sequence[GuidanceMode | None]
    belief: ModeBelief
    pf: TerminalPmf
    n: int
    est: GaussianEstimate
    u_max: float
    Q: np.ndarray | None = None
    C: np.ndarray | None = None
    fim: FutureInputModel = field(default_factory=FutureInputModel)

    def __post_init__(self):
        if len(self.belief) != len(self.modes):
            raise ValueError("belief length does not match the number of modes")
        n = self.model.dim
        self.Q = np.zeros((n, n)) if self.Q is None else np.asarray(self.Q, dtype=float)
        self.C = _as_selector(self.C, n).C
        self._props = [ModePropagator(self.model, m, self.Q) for m in self.modes]

    def quadratic_form(self, H: int):
        """Per-entry gains and offsets of the horizon-``H`` cost.

        Returns ``(w, A, mu, const)``: weights (E,), gains (E, p, H) of the
        commands ``u_n .. u_{n+H-1}``, offsets (E, p) and the constant
        trace contribution, so ``J(u) = sum_e w_e |A_e u + mu_e|^2 + const``.
        """
        C = self.C
        m, var = self.fim.mean, self.fim.variance
        W, A, MU = [], [], []
        const = 0.0
        for P_j, prop in zip(self.belief.probs, self._props):
            for i, p_i in self.pf.positive():
                w = p_i * P_j
                h = i - self.n
                gains = np.zeros((C.shape[0], H))
                if h <= 0:
                    mu = C @ self.est.mean
                    tr = float(np.trace(C @ self.est.cov @ C.T))
                else:
                    for s in range(min(H, h)):
                        gains[:, s] = C @ prop.gain(h - 1 - s)
                    rest = max(h - H, 0)
                    Psi = prop.psi(h)
                    mean = Psi @ self.est.mean + m * prop.gain_sum(rest)
                    Sigma = Psi @ self.est.cov @ Psi.T + var * prop.gain_outer(rest) + prop.noise(h)
                    mu = C @ mean
                    tr = float(np.trace(C @ Sigma @ C.T))
                W.append(w)
                A.append(gains)
                MU.append(mu)
                const += w * tr
        return np.array(W), np.array(A), np.array(MU), const

    def costs(self, U: np.ndarray) -> np.ndarray:
        """Expected cost of each row of ``U`` (shape (S, H))."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        w, A, mu, const = self.quadratic_form(U.shape[1])
        r = np.einsum("eph,sh->sep", A, U) + mu[None]
        return np.einsum("e,sep,sep->s", w, r, r) + const


@dataclass(frozen=True)
class BangBangResult:
    best: tuple[float, ...]
    cost: float
    ties: tuple[tuple[float, ...], ...]


def _sign_patterns(H: int) -> np.ndarray:
    # +1 ahead of -1 so the first row is lexicographically smallest by convention
    return np.array(list(itertools.product((1.0, -1.0), repeat=H)))


def enumerate_bang_bang(
    problem: OracleProblem, H: int, cap: int = DEFAULT_HORIZON_CAP, rtol: float = 1e-12
) -> BangBangResult:
    """Exact maximizer over all ``2**H`` bang-bang sequences.

    Raises:
        ValueError: if ``H`` is non-positive or above ``cap``.
    """
    if H < 1:
        raise ValueError("horizon must be at least 1")
    if H > cap:
        raise ValueError(f"horizon {H} exceeds the enumeration cap {cap}")
    U = problem.u_max * _sign_patterns(H)
    J = problem.costs(U)
    best = float(J.max())
    tol = rtol * max(abs(best), 1.0)
    idx = np.flatnonzero(J >= best - tol)
    ties = tuple(tuple(float(v) for v in U[j]) for j in idx)
    return BangBangResult(ties[0], best, ties)


def grid_search(problem: OracleProblem, H: int, grid_points: int, budget: int = 2_000_000) -> float:
    """Best expected cost over a uniform product grid on ``[-u_max, u_max]**H``."""
    if grid_points < 2:
        raise ValueError("grid needs at least two points per step")
    total = grid_points**H
    if total > budget:
        raise ValueError(f"grid of {total} points exceeds the budget {budget}")
    axis = np.linspace(-problem.u_max, problem.u_max, grid_points)
    best = -np.inf
    chunk = 1 << 15
    it = itertools.product(axis, repeat=H)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        best = max(best, float(problem.costs(np.array(block)).max()))
    return best


def affine_check(
    model: DynamicsModel,
    mode: GuidanceMode | None,
    i: int,
    n: int,
    u: float,
    rng: np.random.Generator,
    x_n=None,
    scale: float = 1.0,
) -> float:
    """Residual between a closed-loop rollout and its affine decomposition.

    Draws a start state, future commands and process noise, rolls the
    engagement from ``n`` to ``i`` with the pursuer feeding back the true
    state, and compares the result with ``a^n u + z`` assembled from
    transition products.
    """
    if i <= n:
        raise ValueError("affine check needs i > n")
    d = model.dim
    x = scale * rng.standard_normal(d) if x_n is None else np.asarray(x_n, dtype=float)
    u_seq = np.concatenate([[u], scale * rng.standard_normal(i - n - 1)])
    w_seq = scale * rng.standard_normal((i - n, d))

    state = rollout_terminal(model, mode, i, n, x, u_seq, w_seq)
    z = transition_product(model, mode, i, n) @ x
    for s, k in enumerate(range(n, i)):
        Phi = transition_product(model, mode, i, k + 1)
        z = z + Phi @ w_seq[s]
        if k > n:
            z = z + Phi @ model.g_T * u_seq[s]
    a = transition_product(model, mode, i, n + 1) @ model.g_T
    return float(np.linalg.norm(state - (a * u + z)))


def rollout_terminal(model: DynamicsModel, mode: GuidanceMode | None, i: int, n: int,
                     x_n, u_seq, w_seq) -> np.ndarray:
    """State at ``i`` after stepping from ``x_n`` with the pursuer feeding back the true state."""
    state = np.asarray(x_n, dtype=float).copy()
    d = model.dim
    for s, k in enumerate(range(n, i)):
        u_M = 0.0 if mode is None else float(
            feedback_gain(mode, (i - k) * model.dt, d, t_go_min=model.dt) @ state
        )
        state = step(model, state, u_seq[s], u_M, w_seq[s])
    return state


def rollout_samples(
    problem: OracleProblem,
    i: int,
    mode_index: int,
    u: float,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Samples of ``C x_i`` (shape (n_samples, p)) by direct simulation.

    Start states are drawn from the posterior, later evader commands from a
    uniform law matching the future-input mean and variance, and process
    noise from ``N(0, Q)``.  The pursuer feeds back the true state.
    """
    model, d = problem.model, problem.model.dim
    mode = problem.modes[mode_index]
    n = problem.n
    if i <= n:
        raise ValueError("rollout needs i > n")
    half = np.sqrt(3.0 * problem.fim.variance)
    L_P = _psd_factor(problem.est.cov)
    L_Q = _psd_factor(problem.Q)
    X = problem.est.mean + rng.standard_normal((n_samples, d)) @ L_P.T
    for k in range(n, i):
        if k == n:
            uT = np.full(n_samples, float(u))
        else:
            uT = problem.fim.mean + rng.uniform(-half, half, n_samples)
        if mode is None:
            uM = np.zeros(n_samples)
        else:
            uM = X @ feedback_gain(mode, (i - k) * model.dt, d, t_go_min=model.dt)
        W = rng.standard_normal((n_samples, d)) @ L_Q.T
        X = X @ model.F.T + np.outer(uT, model.g_T) + np.outer(uM, model.g_M) + W
    return X @ problem.C.T


def rollout_moments(problem: OracleProblem, i: int, mode_index: int, u: float, n_samples: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and covariance of :func:`rollout_samples`."""
    Y = rollout_samples(problem, i, mode_index, u, n_samples, rng)
    return Y.mean(axis=0), np.atleast_2d(np.cov(Y, rowvar=False))


def _psd_factor(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def random_problem(
    rng: np.random.Generator,
    H: int,
    n_modes: int | None = None,
    open_loop: bool = False,
) -> OracleProblem:
    """Random small double-integrator problem with PN pursuer modes.

    Terminal atoms are placed so every enumerated command can matter.
    """
    dt = float(rng.uniform(0.05, 0.5))
    model = make_double_integrator(dt)
    n_modes = int(rng.integers(1, 4)) if n_modes is None else n_modes
    modes = [None if open_loop else GuidanceMode(nav_gain=float(rng.uniform(0.0, 5.0)))
             for _ in range(n_modes)]
    probs = rng.dirichlet(np.ones(n_modes))
    probs[-1] = 1.0 - probs[:-1].sum()
    n = int(rng.integers(0, 5))
    n_atoms = int(rng.integers(1, 5))
    support = np.sort(rng.choice(np.arange(n + 1, n + H + 4), size=n_atoms, replace=False))
    pmass = rng.dirichlet(np.ones(n_atoms))
    pmass[-1] = 1.0 - pmass[:-1].sum()
    A = rng.standard_normal((2, 2))
    cov = A @ A.T * float(rng.uniform(0.0, 2.0))
    u_max = float(rng.uniform(0.5, 10.0))
    g = rng.standard_normal(2)
    Q = float(rng.uniform(0.0, 1.0)) * np.outer(g, g)
    return OracleProblem(
        model=model,
        modes=modes,
        belief=ModeBelief(tuple(probs)),
        pf=TerminalPmf(tuple(int(s) for s in support), tuple(pmass)),
        n=n,
        est=GaussianEstimate(rng.normal(0.0, 5.0, 2), cov),
        u_max=u_max,
        Q=Q,
        fim=FutureInputModel.uniform(u_max),
    )


def random_terminal_set(rng: np.random.Generator, n_entries: int | None = None, p: int | None = None) -> TerminalSet:
    """Random terminal set with entries spread over several magnitudes."""
    E = int(rng.integers(1, 30)) if n_entries is None else n_entries
    p = int(rng.integers(1, 4)) if p is None else p
    w = rng.dirichlet(np.ones(E))
    w = w / w.sum()
    scale = 10.0 ** rng.uniform(-3, 3, size=(E, 1))
    return TerminalSet(
        index=np.arange(E),
        mode=np.zeros(E, dtype=int),
        weight=w,
        a_tilde=rng.standard_normal((E, p)) * scale * 1e-3,
        mu_tilde=rng.standard_normal((E, p)) * scale,
        trace_term=rng.exponential(1.0, E) * scale[:, 0] ** 2,
    )
