"""Exact integration over segmentations of ``1..N`` into ``K`` segments.

``[A^k]_{1,t}`` and ``[A^k]_{t,N+1}`` are computed by log-domain forward and
backward recursions; ``A^0`` is the identity.  Arrays indexed by a boundary
use 0-based prefix indices internally (boundary ``t`` lives at index
``t - 1``); per-time outputs are length-``N`` arrays where index ``t - 1``
holds time ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import poisson

from .errors import ConfigurationError
from .likelihood import SegmentLikelihoodMatrix, SegmentPrior


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - safe), axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


def _identity_row(N: int, at: int) -> np.ndarray:
    row = np.full(N + 1, -np.inf)
    row[at] = 0.0
    return row


@dataclass(frozen=True)
class DPTables:
    """``forward[k, u] = log [A^k]_{1, u+1}``, ``backward[k, u] = log [A^k]_{u+1, N+1}``.

    ``log_C`` holds ``log C_K(a)`` from the same recursion applied to the
    weight-only matrix.
    """

    log_A: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    log_C: np.ndarray

    @property
    def N(self) -> int:
        return self.log_A.shape[0] - 1

    @property
    def K_max(self) -> int:
        return self.forward.shape[0] - 1

    def log_AK(self, K: int) -> float:
        return float(self.forward[K, self.N])


def _forward(log_A: np.ndarray, K_max: int) -> np.ndarray:
    N = log_A.shape[0] - 1
    F = np.empty((K_max + 1, N + 1))
    F[0] = _identity_row(N, 0)
    for k in range(1, K_max + 1):
        F[k] = _lse(F[k - 1][:, None] + log_A, axis=0)
    return F


def _backward(log_A: np.ndarray, K_max: int) -> np.ndarray:
    N = log_A.shape[0] - 1
    G = np.empty((K_max + 1, N + 1))
    G[0] = _identity_row(N, N)
    for k in range(1, K_max + 1):
        G[k] = _lse(log_A + G[k - 1][None, :], axis=1)
    return G


def _as_log_matrix(log_A) -> np.ndarray:
    if isinstance(log_A, SegmentLikelihoodMatrix):
        return log_A.log_A
    return np.asarray(log_A, dtype=float)


def dp_tables(log_A, K_max: int, log_a: Optional[np.ndarray] = None) -> DPTables:
    """Forward/backward tables for ``k <= K_max``.

    ``log_a`` is the weight-only matrix used for ``C_K(a)``; by default the
    uniform weights restricted to the cells where ``log_A`` is finite.
    """
    A = _as_log_matrix(log_A)
    if K_max < 1:
        raise ConfigurationError("K_max must be >= 1")
    N = A.shape[0] - 1
    if log_a is None:
        log_a = np.where(np.isfinite(A), 0.0, -np.inf)
    F = _forward(A, K_max)
    G = _backward(A, K_max)
    for K in range(1, K_max + 1):
        if not np.isfinite(F[K, N]):
            raise ConfigurationError(f"no admissible segmentation with K={K} segments (N={N})")
    log_C = _forward(np.asarray(log_a, dtype=float), K_max)[:, N]
    log_C[0] = 0.0
    return DPTables(A, F, G, log_C)


def count_segmentations(N: int, K: int, L_min: int = 1) -> int:
    """Exact number of segmentations of ``1..N`` into ``K`` segments of length ``>= L_min``."""
    if K < 1 or K > N:
        raise ConfigurationError(f"need 1 <= K <= N, got K={K}, N={N}")
    ways = [1] + [0] * N
    for _ in range(K):
        nxt = [0] * (N + 1)
        for t in range(1, N + 1):
            nxt[t] = sum(ways[u] for u in range(0, t - L_min + 1))
        ways = nxt
    return ways[N]


def segmentation_constant(seg_prior: SegmentPrior, N: int, K: int) -> float:
    """``log C_K(a)``, the sum over segmentations of the product of weights."""
    if K > N:
        raise ConfigurationError(f"K={K} exceeds N={N}")
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    return float(_forward(seg_prior.log_weights(N), K)[K, N])


def log_evidence(tables: DPTables, K: int) -> float:
    """``log p(y | K) = log [A^K]_{1,N+1} - log C_K(a)``."""
    return tables.log_AK(K) - float(tables.log_C[K])


@dataclass(frozen=True)
class KPrior:
    kind: str = "poisson"
    K_max: int = 10
    gamma: float = 4.0

    def __post_init__(self):
        if self.kind not in ("poisson", "uniform"):
            raise ConfigurationError(f"unknown K prior {self.kind!r}")
        if self.K_max < 1:
            raise ConfigurationError("K_max must be >= 1")
        if self.kind == "poisson" and not self.gamma > 0:
            raise ConfigurationError("Poisson rate must be positive")

    def log_probs(self) -> np.ndarray:
        """Log prior over ``K = 1..K_max`` (index ``K - 1``)."""
        K = np.arange(1, self.K_max + 1)
        if self.kind == "uniform":
            lp = np.zeros(self.K_max)
        else:
            lp = poisson.logpmf(K, self.gamma)
        return lp - _lse(lp, axis=0)


def posterior_K(tables: DPTables, kprior: KPrior) -> np.ndarray:
    """``p(K | y)`` for ``K = 1..K_max`` (index ``K - 1``)."""
    K_max = min(kprior.K_max, tables.K_max)
    lp = kprior.log_probs()[:K_max]
    lev = np.array([log_evidence(tables, K) for K in range(1, K_max + 1)])
    joint = lp + lev
    return np.exp(joint - _lse(joint, axis=0))


def changepoint_posteriors(tables: DPTables, K: int):
    """``(B_Kk, B_K)``: ``B_Kk[k-1, t-1]`` is the posterior of ``tau_k = t``.

    Both are empty (shape ``(0, N)`` and zeros) when ``K < 2``.
    """
    N = tables.N
    if K < 2:
        return np.zeros((0, N)), np.zeros(N)
    ev = tables.log_AK(K)
    k = np.arange(1, K)
    # boundary t = 1..N sits at prefix index t - 1
    logB = tables.forward[k, :N] + tables.backward[K - k, :N] - ev
    B_Kk = np.exp(logB)
    return B_Kk, B_Kk.sum(axis=0)


def segment_posteriors_by_k(tables: DPTables, K: int) -> np.ndarray:
    """``S_{K,k}`` as a ``(K, N+1, N+1)`` array indexed ``[k-1, s-1, t-1]``."""
    ev = tables.log_AK(K)
    k = np.arange(1, K + 1)
    logS = (
        tables.forward[k - 1][:, :, None]
        + tables.log_A[None, :, :]
        + tables.backward[K - k][:, None, :]
        - ev
    )
    return np.exp(logS)


def segment_posteriors(tables: DPTables, K: int) -> np.ndarray:
    """``S_K[s-1, t-1]``: posterior probability that ``[s, t)`` is a segment."""
    ev = tables.log_AK(K)
    N = tables.N
    out = np.full((N + 1, N + 1), -np.inf)
    for k in range(1, K + 1):
        term = tables.forward[k - 1][:, None] + tables.log_A + tables.backward[K - k][None, :]
        out = np.logaddexp(out, term)
    return np.exp(out - ev)


def integrated_changepoint_posterior(post_K: np.ndarray, B_K_by_K: dict) -> np.ndarray:
    """``B(t) = sum_{K >= 2} p(K | y) B_K(t)``."""
    out = None
    for K, B_K in B_K_by_K.items():
        term = post_K[K - 1] * B_K
        out = term if out is None else out + term
    return out


@dataclass(frozen=True)
class MapSegmentation:
    K: int
    boundaries: tuple
    log_value: float

    @property
    def change_points(self) -> tuple:
        return self.boundaries[1:-1]


def map_segmentations(log_A, K_max: int) -> list[MapSegmentation]:
    """Best segmentation for each ``K = 1..K_max`` by Segment Neighbourhood Search.

    ``log_value`` is ``max_m sum_{r in m} log A_r``.  Ties go to the smallest
    change-point at each backtracking step.
    """
    A = _as_log_matrix(log_A)
    N = A.shape[0] - 1
    V = np.empty((K_max + 1, N + 1))
    arg = np.zeros((K_max + 1, N + 1), dtype=int)
    V[0] = _identity_row(N, 0)
    for k in range(1, K_max + 1):
        cand = V[k - 1][:, None] + A
        arg[k] = np.argmax(cand, axis=0)
        V[k] = cand[arg[k], np.arange(N + 1)]
    out = []
    for K in range(1, K_max + 1):
        if not np.isfinite(V[K, N]):
            raise ConfigurationError(f"no admissible segmentation with K={K} segments")
        bounds = [N]
        t = N
        for k in range(K, 0, -1):
            t = int(arg[k, t])
            bounds.append(t)
        out.append(MapSegmentation(K, tuple(b + 1 for b in reversed(bounds)), float(V[K, N])))
    return out


def map_segmentation(log_A, K: int) -> MapSegmentation:
    return map_segmentations(log_A, K)[K - 1]


@dataclass
class PosteriorSummary:
    log_evidence_by_K: np.ndarray
    posterior_K: np.ndarray
    B_Kk: dict
    B_K: dict
    B: np.ndarray
    map_by_K: list
    K_hat_1: int
    K_hat_2: int
    map_log_joint_by_K: np.ndarray
    tables: DPTables = field(repr=False)
    _S_cache: dict = field(default_factory=dict, repr=False)

    @property
    def K_max(self) -> int:
        return len(self.posterior_K)

    def S_K(self, K: int) -> np.ndarray:
        if K not in self._S_cache:
            self._S_cache[K] = segment_posteriors(self.tables, K)
        return self._S_cache[K]

    @property
    def global_map(self) -> MapSegmentation:
        return self.map_by_K[self.K_hat_2 - 1]


def summarize(log_A, kprior: KPrior, log_a: Optional[np.ndarray] = None) -> PosteriorSummary:
    """Every segmentation-level posterior quantity for ``K = 1..K_max``."""
    K_max = kprior.K_max
    tables = dp_tables(log_A, K_max, log_a)
    lev = np.array([log_evidence(tables, K) for K in range(1, K_max + 1)])
    post = posterior_K(tables, kprior)
    B_Kk, B_K = {}, {}
    for K in range(2, K_max + 1):
        B_Kk[K], B_K[K] = changepoint_posteriors(tables, K)
    B = integrated_changepoint_posterior(post, B_K) if B_K else np.zeros(tables.N)
    maps = map_segmentations(tables.log_A, K_max)
    map_joint = np.array(
        [kprior.log_probs()[m.K - 1] - tables.log_C[m.K] + m.log_value for m in maps]
    )
    return PosteriorSummary(
        log_evidence_by_K=lev,
        posterior_K=post,
        B_Kk=B_Kk,
        B_K=B_K,
        B=B,
        map_by_K=maps,
        K_hat_1=int(np.argmax(post)) + 1,
        K_hat_2=int(np.argmax(map_joint)) + 1,
        map_log_joint_by_K=map_joint,
        tables=tables,
    )
