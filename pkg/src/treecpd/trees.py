"""Sums over spanning trees with edge-factorised weights.

All weights are handled as log-weights.  The partition function
``Z(w) = sum_T prod_{ij in T} w_ij`` is the determinant of a principal minor
of the weighted Laplacian.  Instead of a generic pivoted LU, the minor is
reduced by eliminating one vertex at a time (Kron reduction): the Schur
complement of a Laplacian is again a Laplacian, so every pivot is a positive
weighted degree and every update adds positive terms.  No cancellation
occurs, which keeps the result accurate when the weights span hundreds of
log-units, as they do for long data segments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError

SAFE_RANGE = 600.0


@dataclass(frozen=True)
class EdgeWeightMatrix:
    """Symmetric matrix of strictly positive edge weights, stored as logs.

    The diagonal is ignored.
    """

    log_w: np.ndarray

    def __post_init__(self):
        log_w = np.array(self.log_w, dtype=float)
        if log_w.ndim != 2 or log_w.shape[0] != log_w.shape[1] or log_w.shape[0] < 2:
            raise ConfigurationError(f"edge weights must be p x p with p >= 2, got {log_w.shape}")
        off = ~np.eye(log_w.shape[0], dtype=bool)
        if not np.all(np.isfinite(log_w[off])):
            raise ConfigurationError("edge log-weights must be finite (zero weights unsupported)")
        if not np.array_equal(log_w[off], log_w.T[off]):
            if not np.allclose(log_w[off], log_w.T[off], rtol=1e-12, atol=1e-12):
                raise ConfigurationError("edge weights must be symmetric")
            log_w = 0.5 * (log_w + log_w.T)
        np.fill_diagonal(log_w, 0.0)
        log_w.setflags(write=False)
        object.__setattr__(self, "log_w", log_w)

    @property
    def p(self) -> int:
        return self.log_w.shape[0]

    @classmethod
    def uniform(cls, p: int) -> "EdgeWeightMatrix":
        return cls(np.zeros((p, p)))

    @classmethod
    def from_weights(cls, w) -> "EdgeWeightMatrix":
        w = np.asarray(w, dtype=float)
        off = ~np.eye(w.shape[0], dtype=bool)
        if np.any(w[off] <= 0):
            raise ConfigurationError("edge weights must be strictly positive")
        log_w = np.zeros_like(w)
        log_w[off] = np.log(w[off])
        return cls(log_w)

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_w)
        np.fill_diagonal(w, 0.0)
        return w


@dataclass(frozen=True)
class TreeDistributionSummary:
    log_Z: float
    edge_prob: np.ndarray


def _as_log_array(w) -> np.ndarray:
    if isinstance(w, EdgeWeightMatrix):
        return w.log_w
    return np.asarray(w, dtype=float)


def _offdiag_max(log_w: np.ndarray) -> np.ndarray:
    p = log_w.shape[-1]
    masked = np.where(np.eye(p, dtype=bool), -np.inf, log_w)
    return masked.max(axis=(-2, -1))


def batch_log_tree_partition(log_w: np.ndarray) -> np.ndarray:
    """``log Z`` for a stack of log-weight matrices of shape ``(..., p, p)``.

    The last vertex is the root of the Laplacian minor.
    """
    log_w = np.asarray(log_w, dtype=float)
    batch_shape = log_w.shape[:-2]
    p = log_w.shape[-1]
    W = log_w.reshape(-1, p, p).copy()
    shift = _offdiag_max(W)
    W -= shift[:, None, None]
    logdet = np.zeros(W.shape[0])
    for k in range(p - 1):
        row = W[:, k, k + 1 :]
        m = row.max(axis=1)
        if not np.all(np.isfinite(m)):
            raise NumericalError("Laplacian minor is singular: the weighted graph is disconnected")
        log_deg = m + np.log(np.exp(row - m[:, None]).sum(axis=1))
        logdet += log_deg
        if k < p - 2:
            frac = row - log_deg[:, None]
            update = row[:, :, None] + frac[:, None, :]
            block = W[:, k + 1 :, k + 1 :]
            np.logaddexp(block, update, out=block)
    out = logdet + (p - 1) * shift
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite tree partition function")
    return out.reshape(batch_shape)


def log_tree_partition(w) -> float:
    """``log sum_T prod_{ij in T} w_ij`` over all spanning trees of ``K_p``."""
    return float(batch_log_tree_partition(_as_log_array(w)))


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(x - safe).sum(axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


def _log_root_resistances(log_w: np.ndarray) -> np.ndarray:
    """Log effective resistance from every vertex to the last one.

    ``log_w`` is a ``(batch, q, q)`` stack of log-conductances with ``-inf``
    on the diagonal.  The minor is factorised as ``L D L^T`` by elimination;
    ``L^{-1}`` has non-negative entries, so
    ``diag(M^{-1}) = sum_k (L^{-1})_{ki}^2 / d_k`` is a log-sum of positive
    terms and no weight ever underflows.
    """
    nb, q, _ = log_w.shape
    m = q - 1
    W = log_w.copy()
    log_d = np.empty((nb, m))
    F = np.full((nb, m, m), -np.inf)
    for k in range(m):
        row = W[:, k, k + 1 :]
        dk = _lse(row, axis=1)
        if not np.all(np.isfinite(dk)):
            raise NumericalError("Laplacian minor is singular: the weighted graph is disconnected")
        log_d[:, k] = dk
        frac = row - dk[:, None]
        F[:, k + 1 :, k] = frac[:, :-1]
        block = W[:, k + 1 :, k + 1 :]
        np.logaddexp(block, row[:, :, None] + frac[:, None, :], out=block)
    X = np.full((nb, m, m), -np.inf)
    for i in range(m):
        X[:, i, i] = 0.0
        if i:
            X[:, i, :i] = _lse(F[:, i, :i, None] + X[:, :i, :i], axis=1)
    return _lse(2 * X - log_d[:, :, None], axis=1)


def _root_resistances(w: np.ndarray) -> np.ndarray:
    """Linear-scale version of :func:`_log_root_resistances` for well-scaled weights."""
    nb, q, _ = w.shape
    m = q - 1
    w = w.copy()
    d = np.empty((nb, m))
    F = np.zeros((nb, m, m))
    for k in range(m):
        row = w[:, k, k + 1 :]
        dk = row.sum(axis=1)
        d[:, k] = dk
        frac = row / dk[:, None]
        F[:, k + 1 :, k] = frac[:, :-1]
        w[:, k + 1 :, k + 1 :] += row[:, :, None] * frac[:, None, :]
    X = np.zeros((nb, m, m))
    for i in range(m):
        X[:, i, i] = 1.0
        if i:
            X[:, i, :i] = np.einsum("bk,bkc->bc", F[:, i, :i], X[:, :i, :i])
    return np.einsum("bki,bk->bi", X * X, 1.0 / d)


def batch_edge_posterior(log_w: np.ndarray) -> np.ndarray:
    """Edge inclusion probabilities under ``P(T) ∝ prod w``, shape ``(..., p, p)``.

    ``P(ij in T) = w_ij * R_ij`` with ``R_ij`` the effective resistance
    between ``i`` and ``j``.  ``R_ij`` is read off the diagonal of the
    minor inverse rooted at ``j``; doing this for every root costs
    ``O(p^4)`` but avoids the cancellation in ``Q_ii + Q_jj - 2 Q_ij``.
    """
    log_w = np.asarray(log_w, dtype=float)
    batch_shape = log_w.shape[:-2]
    p = log_w.shape[-1]
    L = log_w.reshape(-1, p, p)
    nb = L.shape[0]
    eye = np.eye(p, dtype=bool)
    shift = _offdiag_max(L)
    W = L - shift[:, None, None]
    W[:, eye] = -np.inf
    log_R = np.full((nb, p, p), -np.inf)
    # weights within SAFE_RANGE log-units of the maximum cannot underflow in
    # linear scale; only the remaining matrices take the slower log path
    safe = W[:, ~eye].min(axis=1) > -SAFE_RANGE
    w_safe = np.exp(W[safe])
    for j in range(p):
        order = [i for i in range(p) if i != j] + [j]
        rows = order[:-1]
        if safe.any():
            part = _root_resistances(w_safe[:, order][:, :, order])
            log_R[np.ix_(safe, rows, [j])] = np.log(part)[:, :, None]
        if not safe.all():
            part = _log_root_resistances(W[~safe][:, order][:, :, order])
            log_R[np.ix_(~safe, rows, [j])] = part[:, :, None]
    # R is symmetric in exact arithmetic; average the two rootings
    log_R = np.logaddexp(log_R, log_R.transpose(0, 2, 1)) - np.log(2.0)
    prob = np.triu(np.exp(W + log_R), 1)
    prob = prob + prob.transpose(0, 2, 1)
    return prob.reshape(batch_shape + (p, p))


def edge_posterior(w) -> TreeDistributionSummary:
    log_w = _as_log_array(w)
    return TreeDistributionSummary(
        log_Z=log_tree_partition(log_w), edge_prob=batch_edge_posterior(log_w)
    )


def elementwise_power(w: EdgeWeightMatrix, K: int) -> EdgeWeightMatrix:
    if K < 1:
        raise ConfigurationError("power must be >= 1")
    return EdgeWeightMatrix(K * w.log_w)


def elementwise_product(ws: Sequence[EdgeWeightMatrix]) -> EdgeWeightMatrix:
    if len(ws) == 0:
        raise ConfigurationError("empty weight-matrix list")
    p = ws[0].p
    if any(w.p != p for w in ws):
        raise ConfigurationError("weight matrices differ in dimension")
    return EdgeWeightMatrix(sum(w.log_w for w in ws))
