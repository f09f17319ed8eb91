"""Integrated segment likelihoods and the weighted segment-likelihood matrix.

On a segment ``r`` the tree backend sums over all spanning trees:

    log p(y^r) = log Z(omega_r) - log Z(b) + sum_i log p(y^r_i),
    omega_r[i, j] = b[i, j] * p(y^r_i, y^r_j) / (p(y^r_i) p(y^r_j)).

The full backend uses the unconstrained ``p``-dimensional conjugate marginal.
With several replicates each block marginal is replaced by the tempered sum
over replicates.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError, UnsupportedOperation
from .marginals import (
    CumulativeStats,
    PriorSpec,
    batch_block_marginals,
    batch_full_marginal,
    prefix_stats,
)
from .trees import EdgeWeightMatrix, batch_edge_posterior, batch_log_tree_partition

CHUNK = 2048


@dataclass(frozen=True)
class SegmentPrior:
    """Segment weights ``a_r`` and a minimum segment length.

    ``log_table``, when given, is an ``(N+1, N+1)`` array whose entry
    ``[s-1, t-1]`` is ``log a`` for the segment ``[s, t)``.
    """

    kind: str = "uniform"
    L_min: int = 1
    log_table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "custom"):
            raise ConfigurationError(f"unknown segment prior {self.kind!r}")
        if self.L_min < 1:
            raise ConfigurationError("L_min must be >= 1")
        if self.kind == "custom" and self.log_table is None:
            raise ConfigurationError("custom segment prior needs a weight table")

    def log_weights(self, N: int) -> np.ndarray:
        """``(N+1, N+1)`` matrix of ``log a``; ``-inf`` on inadmissible cells."""
        idx = np.arange(N + 1)
        admissible = idx[None, :] - idx[:, None] >= self.L_min
        if self.kind == "uniform":
            base = np.zeros((N + 1, N + 1))
        else:
            base = np.asarray(self.log_table, dtype=float)
            if base.shape != (N + 1, N + 1):
                raise ConfigurationError(
                    f"segment weight table has shape {base.shape}, expected {(N + 1, N + 1)}"
                )
            if np.any(np.isnan(base[admissible])) or np.any(base[admissible] == np.inf):
                raise ConfigurationError("segment log-weights must be < +inf")
        return np.where(admissible, base, -np.inf)


@dataclass(frozen=True)
class SegmentLikelihoodMatrix:
    """``log_A[s-1, t-1] = log(a_r p(y^r))`` for ``r = [s, t)``, ``-inf`` elsewhere."""

    log_A: np.ndarray
    L_min: int = 1

    @property
    def N(self) -> int:
        return self.log_A.shape[0] - 1

    def entry(self, s: int, t: int) -> float:
        return float(self.log_A[s - 1, t - 1])


def _check_replicates(cums: Sequence[CumulativeStats]) -> None:
    if len(cums) == 0:
        raise ConfigurationError("empty replicate list")
    shape = (cums[0].n_times, cums[0].n_vars)
    for k, c in enumerate(cums):
        if (c.n_times, c.n_vars) != shape:
            raise ConfigurationError(
                f"replicate {k + 1} has shape {(c.n_times, c.n_vars)}, expected {shape}"
            )


class SegmentModel:
    """Segment likelihoods for one series or a set of aligned replicates.

    Per-segment ``log Z(omega_r)`` and vertex log marginals are cached when
    :meth:`build_A` runs; edge-probability matrices are computed on demand and
    memoised.
    """

    def __init__(
        self,
        data,
        prior: PriorSpec,
        b: Optional[EdgeWeightMatrix] = None,
        seg_prior: Optional[SegmentPrior] = None,
    ):
        if isinstance(data, CumulativeStats):
            cums = [data]
        elif isinstance(data, (list, tuple)):
            cums = [d if isinstance(d, CumulativeStats) else prefix_stats(d) for d in data]
        else:
            cums = [prefix_stats(data)]
        _check_replicates(cums)
        self.cums = cums
        self.prior = prior
        self.N = cums[0].n_times
        self.p = cums[0].n_vars
        if prior.p != self.p:
            raise ConfigurationError(f"prior dimension {prior.p} != data dimension {self.p}")
        self.b = b if b is not None else EdgeWeightMatrix.uniform(self.p)
        if self.b.p != self.p:
            raise ConfigurationError(f"edge prior dimension {self.b.p} != {self.p}")
        self.seg_prior = seg_prior or SegmentPrior()
        self.log_Zb = float(batch_log_tree_partition(self.b.log_w))
        self._log_Z_omega = None
        self._vertex = None
        self._edge_cache: dict = {}
        self._lock = threading.Lock()

    @property
    def backend(self) -> str:
        return self.prior.backend

    def _check_segment(self, s: int, t: int) -> None:
        if not 1 <= s < t <= self.N + 1:
            raise ConfigurationError(f"invalid segment [{s}, {t}) for N={self.N}")

    def _block_marginals(self, start, stop):
        total = None
        for cum in self.cums:
            m = batch_block_marginals(cum, start, stop, self.prior)
            if total is None:
                total = m
            else:
                total.vertex += m.vertex
                total.pair += m.pair
        total.vertex /= self.prior.temper_alpha
        total.pair /= self.prior.temper_alpha
        return total

    def batch_log_omega(self, start, stop):
        """``(log omega_r, vertex log marginals)`` for 0-based prefix indices."""
        m = self._block_marginals(start, stop)
        v = m.vertex
        log_omega = np.triu(self.b.log_w + m.pair - v[:, :, None] - v[:, None, :], 1)
        log_omega = log_omega + log_omega.transpose(0, 2, 1)
        return log_omega, v

    def _batch_parts(self, start, stop):
        """Segment log likelihoods plus the tree-backend cacheable parts."""
        if self.backend == "full":
            total = sum(batch_full_marginal(c, start, stop, self.prior) for c in self.cums)
            return total / self.prior.temper_alpha, None, None
        log_omega, v = self.batch_log_omega(start, stop)
        log_Z = batch_log_tree_partition(log_omega)
        return log_Z - self.log_Zb + v.sum(axis=1), log_Z, v

    def _annotated(self, start, stop):
        try:
            return self._batch_parts(start, stop)
        except NumericalError as exc:
            if len(start) == 1:
                s, t = int(start[0]) + 1, int(stop[0]) + 1
                if f"[{s}, {t})" in str(exc):
                    raise
                raise NumericalError(f"segment [{s}, {t}): {exc}") from exc
            for a, b in zip(start, stop):
                self._annotated(np.array([a]), np.array([b]))
            raise

    def segment_log_likelihood(self, s: int, t: int) -> float:
        """``log p(y^r)`` for ``r = [s, t)`` (1-based, half-open)."""
        self._check_segment(s, t)
        ll, _, _ = self._annotated(np.array([s - 1]), np.array([t - 1]))
        return float(ll[0])

    def log_omega(self, s: int, t: int) -> EdgeWeightMatrix:
        self._check_segment(s, t)
        if self.backend != "tree":
            raise UnsupportedOperation("posterior edge weights need the tree backend")
        log_omega, _ = self.batch_log_omega(np.array([s - 1]), np.array([t - 1]))
        return EdgeWeightMatrix(log_omega[0])

    def admissible_pairs(self):
        N, L = self.N, self.seg_prior.L_min
        start, stop = np.triu_indices(N + 1, k=L)
        return start, stop

    def build_A(self, threads: int = 1) -> SegmentLikelihoodMatrix:
        """Fill every admissible cell of the segment-likelihood matrix."""
        N = self.N
        log_a = self.seg_prior.log_weights(N) / self.prior.temper_alpha
        start, stop = self.admissible_pairs()
        chunks = [
            (start[i : i + CHUNK], stop[i : i + CHUNK]) for i in range(0, len(start), CHUNK)
        ]
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(lambda c: self._annotated(*c), chunks))
        else:
            parts = [self._annotated(*c) for c in chunks]
        log_A = np.full((N + 1, N + 1), -np.inf)
        if self.backend == "tree":
            self._log_Z_omega = np.full((N + 1, N + 1), np.nan)
            self._vertex = np.full((N + 1, N + 1, self.p), np.nan)
        for (a, b), (ll, log_Z, v) in zip(chunks, parts):
            log_A[a, b] = log_a[a, b] + ll
            if log_Z is not None:
                self._log_Z_omega[a, b] = log_Z
                self._vertex[a, b] = v
        return SegmentLikelihoodMatrix(log_A, self.seg_prior.L_min)

    def cached_log_Z_omega(self, s: int, t: int) -> float:
        if self._log_Z_omega is None:
            raise UnsupportedOperation("build_A has not been run with the tree backend")
        return float(self._log_Z_omega[s - 1, t - 1])

    def batch_edge_posteriors(self, start, stop) -> np.ndarray:
        if self.backend != "tree":
            raise UnsupportedOperation("edge posteriors need the tree backend")
        out = np.empty((len(start), self.p, self.p))
        for i in range(0, len(start), CHUNK):
            log_omega, _ = self.batch_log_omega(start[i : i + CHUNK], stop[i : i + CHUNK])
            out[i : i + CHUNK] = batch_edge_posterior(log_omega)
        return out

    def segment_edge_posterior(self, s: int, t: int) -> np.ndarray:
        """Posterior edge-inclusion probabilities on segment ``[s, t)``."""
        self._check_segment(s, t)
        if self.backend != "tree":
            raise UnsupportedOperation("edge posteriors need the tree backend")
        key = (s, t)
        hit = self._edge_cache.get(key)
        if hit is None:
            hit = self.batch_edge_posteriors(np.array([s - 1]), np.array([t - 1]))[0]
            hit.setflags(write=False)
            with self._lock:
                hit = self._edge_cache.setdefault(key, hit)
        return hit

    def prior_edge_posterior(self) -> np.ndarray:
        return batch_edge_posterior(self.b.log_w)
