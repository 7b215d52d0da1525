"""Terminal-set construction and the terminal-set-based evasion (TSE) selector.

For every candidate terminal index ``i`` and pursuer mode ``j`` the terminal
state is affine in the current evader command,
``x_i = a(i, j) u + z(i, j)``.  The first two moments of ``z`` are propagated
analytically through the pursuer's closed loop; the selector then picks the
bound whose expected squared terminal miss is larger.

The closed-loop matrix at stage ``k`` for candidate ``i`` depends only on the
steps-to-go ``i - k``.  Transition products are therefore cached by
steps-to-go, so rebuilding a terminal set at every decision step costs one
lookup per (index, mode) pair.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .dynamics import DynamicsModel, closed_loop_matrix
from .estimation import GaussianEstimate, is_psd
from .guidance import GuidanceMode, ModeBelief
from .terminal_time import TerminalPmf

__all__ = [
    "FutureInputModel",
    "ModePropagator",
    "OutputSelector",
    "TerminalSet",
    "TerminalSetBuilder",
    "build_terminal_set",
    "cost_sweep",
    "expected_cost",
    "input_gain",
    "scores",
    "select",
    "shaping",
    "transition_product",
]


@dataclass(frozen=True)
class FutureInputModel:
    """I.i.d. model of the evader's own future commands (used only for costing)."""

    mean: float = 0.0
    variance: float = 0.0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("future-input variance must be non-negative")

    @classmethod
    def uniform(cls, u_max: float) -> "FutureInputModel":
        """Uniform on ``[-u_max, u_max]``."""
        return cls(0.0, u_max**2 / 3.0)

    @classmethod
    def bang_bang(cls, u_max: float) -> "FutureInputModel":
        """Equiprobable ``+-u_max``."""
        return cls(0.0, u_max**2)

    @classmethod
    def from_name(cls, name: str, u_max: float) -> "FutureInputModel":
        try:
            return {"uniform": cls.uniform, "bang_bang": cls.bang_bang}[name](u_max)
        except KeyError:
            if name == "zero":
                return cls()
            raise ValueError(f"unknown future-input model {name!r}") from None


@dataclass(frozen=True)
class OutputSelector:
    """Rows of the terminal state that enter the cost."""

    C: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.array(self.C, dtype=float))
        if np.linalg.matrix_rank(C) != C.shape[0]:
            raise ValueError("output selector must have full row rank")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @classmethod
    def position(cls, dim: int) -> "OutputSelector":
        C = np.zeros((1, dim))
        C[0, 0] = 1.0
        return cls(C)


def _as_selector(C, dim: int) -> OutputSelector:
    if C is None:
        return OutputSelector.position(dim)
    return C if isinstance(C, OutputSelector) else OutputSelector(C)


@dataclass(frozen=True)
class TerminalSet:
    """Projected terminal-set entries, one per (terminal index, mode) pair.

    Attributes:
        index: Candidate terminal step of each entry.
        mode: Guidance-mode position of each entry.
        weight: ``p_f(i) * P_j``; sums to one.
        a_tilde: (E, p) projected gains of the current command.
        mu_tilde: (E, p) projected mean of the command-independent part.
        trace_term: (E,) trace of its projected covariance.
    """

    index: np.ndarray
    mode: np.ndarray
    weight: np.ndarray
    a_tilde: np.ndarray
    mu_tilde: np.ndarray
    trace_term: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        a = np.asarray(self.a_tilde, dtype=float)
        mu = np.asarray(self.mu_tilde, dtype=float)
        tr = np.asarray(self.trace_term, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if mu.ndim == 1:
            mu = mu[:, None]
        E = w.size
        if a.shape[0] != E or mu.shape != a.shape or tr.shape != (E,):
            raise ValueError("terminal-set arrays have inconsistent shapes")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must be non-negative and sum to 1, got {w.sum()!r}")
        if np.any(tr < -1e-9 * max(1.0, float(np.abs(tr).max(initial=0.0)))):
            raise ValueError("trace terms must be non-negative")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "a_tilde", a)
        object.__setattr__(self, "mu_tilde", mu)
        object.__setattr__(self, "trace_term", np.maximum(tr, 0.0))
        object.__setattr__(self, "index", np.asarray(self.index, dtype=int).reshape(E))
        object.__setattr__(self, "mode", np.asarray(self.mode, dtype=int).reshape(E))

    @classmethod
    def from_entries(cls, weight, a_tilde, mu_tilde, trace_term=None) -> "TerminalSet":
        """Convenience constructor for hand-written sets (indices are placeholders)."""
        w = np.atleast_1d(np.asarray(weight, dtype=float))
        tr = np.zeros(w.size) if trace_term is None else np.atleast_1d(trace_term)
        return cls(
            index=np.arange(w.size),
            mode=np.zeros(w.size, dtype=int),
            weight=w,
            a_tilde=np.reshape(np.asarray(a_tilde, dtype=float), (w.size, -1)),
            mu_tilde=np.reshape(np.asarray(mu_tilde, dtype=float), (w.size, -1)),
            trace_term=tr,
        )

    def __len__(self) -> int:
        return self.weight.size

    def to_table(self, sep: str = ",") -> str:
        """Delimited dump with header ``i, j, weight, a_tilde, mu_tilde, trace``."""
        buf = io.StringIO()
        p = self.a_tilde.shape[1]
        a_cols = ["a_tilde"] if p == 1 else [f"a_tilde_{r}" for r in range(p)]
        m_cols = ["mu_tilde"] if p == 1 else [f"mu_tilde_{r}" for r in range(p)]
        buf.write(sep.join(["i", "j", "weight", *a_cols, *m_cols, "trace"]) + "\n")
        for e in range(len(self)):
            row = [str(self.index[e]), str(self.mode[e]), repr(float(self.weight[e]))]
            row += [repr(float(v)) for v in self.a_tilde[e]]
            row += [repr(float(v)) for v in self.mu_tilde[e]]
            row.append(repr(float(self.trace_term[e])))
            buf.write(sep.join(row) + "\n")
        return buf.getvalue()


# -- transition products -----------------------------------------------------

TgoOfStep = Callable[[int], float] | Mapping[int, float] | None


def _stage_matrix(model: DynamicsModel, mode: GuidanceMode | None, t_go: float) -> np.ndarray:
    if mode is None:
        return model.F
    return closed_loop_matrix(model, mode, t_go)


def _tgo_lookup(tgo_of_step: TgoOfStep, i: int, dt: float) -> Callable[[int], float]:
    if tgo_of_step is None:
        return lambda k: (i - k) * dt
    if callable(tgo_of_step):
        return tgo_of_step
    return lambda k: tgo_of_step[k]


def transition_product(
    model: DynamicsModel,
    mode: GuidanceMode | None,
    i: int,
    l: int,
    tgo_of_step: TgoOfStep = None,
) -> np.ndarray:
    """Closed-loop transition from stage ``l`` to stage ``i``.

    The product ``F^{i-1} ... F^{l}`` of per-stage closed-loop matrices where
    stage ``k`` uses time-to-go ``tgo_of_step(k)`` (default ``(i - k) dt``).
    """
    if l > i:
        raise ValueError(f"transition product needs l <= i, got l={l}, i={i}")
    tgo = _tgo_lookup(tgo_of_step, i, model.dt)
    Phi = np.eye(model.dim)
    for k in range(l, i):
        Phi = _stage_matrix(model, mode, tgo(k)) @ Phi
    return Phi


def input_gain(
    model: DynamicsModel,
    mode: GuidanceMode | None,
    i: int,
    k: int,
    tgo_of_step: TgoOfStep = None,
) -> np.ndarray:
    """Gain from the evader command at stage ``k`` to the state at stage ``i``."""
    if k >= i:
        raise ValueError(f"input gain needs k < i, got k={k}, i={i}")
    return transition_product(model, mode, i, k + 1, tgo_of_step) @ model.g_T


class ModePropagator:
    """Closed-loop transition products of one mode, indexed by steps-to-go.

    ``psi(h)`` is the transition over the last ``h`` stages before a candidate
    terminal index.  Running sums over those stages are cached alongside it:
    ``gain_sum(h)`` and ``gain_outer(h)`` accumulate ``psi(j) g_T`` and its
    outer products for ``j < h``; ``noise(h)`` accumulates
    ``psi(j) Q psi(j)^T``.
    """

    def __init__(self, model: DynamicsModel, mode: GuidanceMode | None, Q=None):
        self.model = model
        self.mode = mode
        n = model.dim
        self.Q = np.zeros((n, n)) if Q is None else np.asarray(Q, dtype=float)
        self._psi = [np.eye(n)]
        self._gsum = [np.zeros(n)]
        self._gouter = [np.zeros((n, n))]
        self._noise = [np.zeros((n, n))]

    def _extend(self, h: int) -> None:
        g = self.model.g_T
        while len(self._psi) <= h:
            m = len(self._psi)
            P = self._psi[-1]
            a = P @ g
            self._gsum.append(self._gsum[-1] + a)
            self._gouter.append(self._gouter[-1] + np.outer(a, a))
            self._noise.append(self._noise[-1] + P @ self.Q @ P.T)
            M = _stage_matrix(self.model, self.mode, m * self.model.dt)
            self._psi.append(P @ M)

    def psi(self, h: int) -> np.ndarray:
        self._extend(h)
        return self._psi[h]

    def gain(self, h: int) -> np.ndarray:
        """Gain of a command applied ``h + 1`` stages before the terminal index."""
        return self.psi(h) @ self.model.g_T

    def gain_sum(self, h: int) -> np.ndarray:
        self._extend(h)
        return self._gsum[h]

    def gain_outer(self, h: int) -> np.ndarray:
        self._extend(h)
        return self._gouter[h]

    def noise(self, h: int) -> np.ndarray:
        self._extend(h)
        return self._noise[h]


class TerminalSetBuilder:
    """Builds terminal sets for a fixed model, mode library and terminal PMF.

    Args:
        model: Engagement dynamics.
        modes: Candidate pursuer guidance modes.
        pf: Terminal-index PMF.
        Q: Process-noise covariance of the true dynamics.
        C: Output selector (default: lateral separation).
        future: Model of the evader's own future commands.
        include_posterior: Propagate the posterior covariance into the trace
            terms. Only the cost level changes; the selector does not.
        Q_extra: Optional additional noise for the modeled pursuer
            information state, added to ``Q``.
    """

    def __init__(
        self,
        model: DynamicsModel,
        modes: Sequence[GuidanceMode],
        pf: TerminalPmf,
        Q=None,
        C=None,
        future: FutureInputModel | None = None,
        include_posterior: bool = True,
        Q_extra=None,
    ):
        n = model.dim
        Q = np.zeros((n, n)) if Q is None else np.asarray(Q, dtype=float)
        if Q_extra is not None:
            Q = Q + np.asarray(Q_extra, dtype=float)
        if not is_psd(Q):
            raise ValueError("process-noise covariance must be positive semidefinite")
        self.model = model
        self.modes = list(modes)
        if not self.modes:
            raise ValueError("at least one guidance mode is required")
        self.pf = pf
        self.Q = Q
        self.C = _as_selector(C, n).C
        self.future = future or FutureInputModel()
        self.include_posterior = include_posterior
        self.atoms = pf.positive()
        self._prop = [ModePropagator(model, m, Q) for m in self.modes]
        self._coef_cache: dict[tuple[int, tuple[float, ...]], tuple[np.ndarray, float]] = {}

    def _check_belief(self, belief: ModeBelief) -> None:
        if len(belief) != len(self.modes):
            raise ValueError("belief length does not match the number of modes")

    def build(self, est: GaussianEstimate, belief: ModeBelief, n: int) -> TerminalSet:
        self._check_belief(belief)
        if est.dim != self.model.dim:
            raise ValueError("estimate dimension does not match the model")
        C = self.C
        m, var = self.future.mean, self.future.variance
        rows = []
        for j, (P_j, prop) in enumerate(zip(belief.probs, self._prop)):
            for i, p_i in self.atoms:
                h = i - n
                if h <= 0:
                    a = np.zeros(self.model.dim)
                    mu = est.mean
                    Sigma = est.cov if self.include_posterior else np.zeros_like(est.cov)
                else:
                    Psi = prop.psi(h)
                    a = prop.gain(h - 1)
                    mu = Psi @ est.mean + m * prop.gain_sum(h - 1)
                    Sigma = var * prop.gain_outer(h - 1) + prop.noise(h)
                    if self.include_posterior:
                        Sigma = Sigma + Psi @ est.cov @ Psi.T
                rows.append((i, j, p_i * P_j, C @ a, C @ mu, float(np.trace(C @ Sigma @ C.T))))
        return TerminalSet(
            index=np.array([r[0] for r in rows]),
            mode=np.array([r[1] for r in rows]),
            weight=np.array([r[2] for r in rows]),
            a_tilde=np.array([r[3] for r in rows]),
            mu_tilde=np.array([r[4] for r in rows]),
            trace_term=np.array([r[5] for r in rows]),
        )

    def shaping_coefficients(self, belief: ModeBelief, n: int) -> tuple[np.ndarray, float]:
        """Return ``(s, s0)`` with ``shaping = s @ mean + s0`` at step ``n``.

        The shaping value is linear in the posterior mean and independent of
        the covariance, so one coefficient pair serves every trial at a step.
        """
        key = (n, belief.probs)
        hit = self._coef_cache.get(key)
        if hit is not None:
            return hit
        self._check_belief(belief)
        C = self.C
        s = np.zeros(self.model.dim)
        s0 = 0.0
        m = self.future.mean
        for P_j, prop in zip(belief.probs, self._prop):
            for i, p_i in self.atoms:
                h = i - n
                if h <= 0:
                    continue
                w = p_i * P_j
                a_t = C @ prop.gain(h - 1)
                s = s + w * (a_t @ (C @ prop.psi(h)))
                if m != 0.0:
                    s0 += w * float(a_t @ (C @ (m * prop.gain_sum(h - 1))))
        self._coef_cache[key] = (s, s0)
        return s, s0


def build_terminal_set(
    est: GaussianEstimate,
    modes: Sequence[GuidanceMode],
    belief: ModeBelief,
    pf: TerminalPmf,
    n: int,
    fim: FutureInputModel,
    Q,
    C,
    model: DynamicsModel,
    include_posterior: bool = True,
) -> TerminalSet:
    """One-shot terminal set at decision step ``n``."""
    builder = TerminalSetBuilder(model, modes, pf, Q, C, fim, include_posterior)
    return builder.build(est, belief, n)


# -- scores and selection ----------------------------------------------------

def _weighted_sq(ts: TerminalSet, u: float) -> float:
    r = ts.a_tilde * u + ts.mu_tilde
    return float(ts.weight @ np.einsum("ep,ep->e", r, r))


def scores(ts: TerminalSet, u_max: float) -> tuple[float, float]:
    """Mean-term costs ``(S_plus, S_minus)`` of the two bound commands."""
    return _weighted_sq(ts, u_max), _weighted_sq(ts, -u_max)


def shaping(ts: TerminalSet) -> float:
    """Weighted inner product of projected gains and projected mean shifts."""
    return float(ts.weight @ np.einsum("ep,ep->e", ts.a_tilde, ts.mu_tilde))


def select(ts: TerminalSet, u_max: float) -> float:
    """Bang-bang choice ``u_max * sign(shaping)``; a zero shaping value picks ``+u_max``."""
    return u_max if shaping(ts) >= 0.0 else -u_max


def expected_cost(ts: TerminalSet, u: float, u_max: float | None = None) -> float:
    """Expected squared terminal miss for current command ``u``."""
    if u_max is not None and abs(u) > u_max * (1.0 + 1e-12):
        raise ValueError(f"command {u!r} exceeds the bound {u_max!r}")
    return _weighted_sq(ts, u) + float(ts.weight @ ts.trace_term)


def cost_sweep(ts: TerminalSet, u_max: float, grid_points: int) -> np.ndarray:
    """Rows ``(u, J(u))`` on a uniform grid over ``[-u_max, u_max]``."""
    if grid_points < 2:
        raise ValueError("cost sweep needs at least two grid points")
    u = np.linspace(-u_max, u_max, grid_points)
    const = float(ts.weight @ ts.trace_term)
    J = np.array([_weighted_sq(ts, v) for v in u]) + const
    return np.column_stack([u, J])
