"""Conjugate Gaussian marginal likelihoods on index blocks of data segments.

Covariances follow an inverse-Wishart prior ``Sigma ~ IW(alpha, phi)`` with
density proportional to ``|Sigma|^{-(alpha + p + 1)/2} exp(-tr(phi Sigma^-1)/2)``,
so ``E[Sigma] = phi / (alpha - p - 1)``.  The marginal of a sub-block ``D`` of
size ``d`` is ``IW(alpha - p + d, phi[D, D])``; using these block marginals for
every vertex and every edge keeps the per-tree priors coherent.

Time boundaries are 1-based and half-open: ``[s, t)`` with ``1 <= s < t <= N+1``.
Variable indices are ordinary 0-based numpy indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, IngestionError, NumericalError

LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    replicate_id: Optional[str] = None
    variable_names: Optional[list] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise IngestionError(f"data must be a 2-D array, got shape {values.shape}")
        n, p = values.shape
        if n < 2 or p < 2:
            raise IngestionError(f"need at least 2 time points and 2 variables, got {n}x{p}")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            row, col = bad[0]
            raise IngestionError(f"non-finite value at row {row + 1}, column {col + 1}")
        if self.variable_names is not None and len(self.variable_names) != p:
            raise IngestionError(f"{len(self.variable_names)} variable names for {p} columns")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PriorSpec:
    """Hyper-parameters of the (normal-)inverse-Wishart prior.

    ``temper_alpha`` divides every per-replicate log block marginal; it is 1 for
    an untempered likelihood.
    """

    alpha: float
    phi: np.ndarray
    mean_mode: str = "zero"
    kappa0: float = 1.0
    mu0: Optional[np.ndarray] = None
    backend: str = "tree"
    temper_alpha: float = 1.0

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ConfigurationError(f"phi must be square, got shape {phi.shape}")
        p = phi.shape[0]
        if not np.allclose(phi, phi.T, rtol=1e-12, atol=1e-12 * np.abs(phi).max()):
            raise ConfigurationError("phi must be symmetric")
        phi = 0.5 * (phi + phi.T)
        if np.linalg.eigvalsh(phi).min() <= 0:
            raise ConfigurationError("phi must be positive definite")
        if not self.alpha > p - 1:
            raise ConfigurationError(f"alpha={self.alpha} must exceed p - 1 = {p - 1}")
        if self.mean_mode not in ("zero", "unknown"):
            raise ConfigurationError(f"unknown mean_mode {self.mean_mode!r}")
        if self.backend not in ("tree", "full"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if not self.temper_alpha >= 1:
            raise ConfigurationError(f"temper_alpha={self.temper_alpha} must be >= 1")
        if self.mean_mode == "unknown" and not self.kappa0 > 0:
            raise ConfigurationError("kappa0 must be positive")
        mu0 = np.zeros(p) if self.mu0 is None else np.asarray(self.mu0, dtype=float)
        if mu0.shape != (p,):
            raise ConfigurationError(f"mu0 must have length {p}")
        phi.setflags(write=False)
        mu0.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "mu0", mu0)

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    @classmethod
    def default(cls, p: int, **kwargs) -> "PriorSpec":
        """``alpha = p + 10`` and ``phi = (alpha - p - 1) I``, i.e. ``E[Sigma] = I``."""
        alpha = kwargs.pop("alpha", p + 10.0)
        return cls(alpha=alpha, phi=(alpha - p - 1) * np.eye(p), **kwargs)

    def block_dof(self, d: int) -> float:
        return self.alpha - self.p + d


@dataclass(frozen=True)
class CumulativeStats:
    """Prefix sums over time; row ``k`` holds the sums of the first ``k`` rows.

    Prefixes are kept in extended precision so that segment differences are
    as accurate as direct summation.
    """

    n_prefix: np.ndarray
    sum_prefix: np.ndarray
    outer_prefix: np.ndarray

    @property
    def n_times(self) -> int:
        return len(self.n_prefix) - 1

    @property
    def n_vars(self) -> int:
        return self.sum_prefix.shape[1]


@dataclass(frozen=True)
class SegmentStats:
    n: int
    s_vec: np.ndarray
    s_mat: np.ndarray


def prefix_stats(data) -> CumulativeStats:
    if not isinstance(data, Dataset):
        data = Dataset(np.asarray(data, dtype=float))
    y = data.values.astype(np.longdouble)
    n, p = y.shape
    sums = np.zeros((n + 1, p), dtype=np.longdouble)
    outer = np.zeros((n + 1, p, p), dtype=np.longdouble)
    np.cumsum(y, axis=0, out=sums[1:])
    np.cumsum(y[:, :, None] * y[:, None, :], axis=0, out=outer[1:])
    for arr in (sums, outer):
        arr.setflags(write=False)
    return CumulativeStats(np.arange(n + 1), sums, outer)


def _check_bounds(cum: CumulativeStats, s: int, t: int) -> None:
    if not 1 <= s < t <= cum.n_times + 1:
        raise ConfigurationError(
            f"invalid segment [{s}, {t}): need 1 <= s < t <= {cum.n_times + 1}"
        )


def segment_stats(cum: CumulativeStats, s: int, t: int) -> SegmentStats:
    """Sufficient statistics of rows ``s .. t-1`` (1-based), in O(p^2)."""
    _check_bounds(cum, s, t)
    a, b = s - 1, t - 1
    return SegmentStats(
        n=int(cum.n_prefix[b] - cum.n_prefix[a]),
        s_vec=(cum.sum_prefix[b] - cum.sum_prefix[a]).astype(float),
        s_mat=(cum.outer_prefix[b] - cum.outer_prefix[a]).astype(float),
    )


def batch_segment_stats(cum: CumulativeStats, start, stop):
    """Vectorised :func:`segment_stats` for 0-based prefix indices ``start < stop``."""
    start = np.asarray(start)
    stop = np.asarray(stop)
    n = (cum.n_prefix[stop] - cum.n_prefix[start]).astype(float)
    s_vec = (cum.sum_prefix[stop] - cum.sum_prefix[start]).astype(float)
    s_mat = (cum.outer_prefix[stop] - cum.outer_prefix[start]).astype(float)
    return n, s_vec, s_mat


def log_multivariate_gamma(d: int, x) -> np.ndarray | float:
    """``log Gamma_d(x) = d(d-1)/4 log(pi) + sum_j log Gamma(x - (j-1)/2)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= (d - 1) / 2):
        raise ConfigurationError(f"log_multivariate_gamma: x must exceed {(d - 1) / 2}")
    out = d * (d - 1) / 4 * LOG_PI + sum(gammaln(x - j / 2) for j in range(d))
    return float(out) if out.ndim == 0 else out


def _posterior_scatter(n, s_vec, s_mat, prior: PriorSpec):
    """Matrix added to phi by the data; shape ``(..., p, p)``."""
    if prior.mean_mode == "zero":
        return s_mat
    n_ = np.asarray(n, dtype=float)[..., None]
    ybar = s_vec / n_
    centered = s_mat - n_[..., None] * ybar[..., :, None] * ybar[..., None, :]
    dev = ybar - prior.mu0
    shrink = (prior.kappa0 * n_ / (prior.kappa0 + n_))[..., None]
    return centered + shrink * dev[..., :, None] * dev[..., None, :]


def _normaliser(d: int, n, prior: PriorSpec):
    """Terms of the block log marginal that depend only on ``n`` and ``d``."""
    nu = prior.block_dof(d)
    n = np.asarray(n, dtype=float)
    out = (
        -0.5 * n * d * LOG_PI
        + log_multivariate_gamma(d, (nu + n) / 2)
        - log_multivariate_gamma(d, nu / 2)
    )
    if prior.mean_mode == "unknown":
        out = out + 0.5 * d * np.log(prior.kappa0 / (prior.kappa0 + n))
    return out


def log_block_marginal(stats: SegmentStats, block: Sequence[int], prior: PriorSpec) -> float:
    """Log integrated likelihood of the observations restricted to ``block``."""
    block = list(block)
    d = len(block)
    p = prior.p
    if d not in (1, 2, p) or len(set(block)) != d or not all(0 <= i < p for i in block):
        raise ConfigurationError(f"invalid block {block} for p={p}")
    if stats.n < 1:
        raise ConfigurationError("segment must contain at least one observation")
    idx = np.ix_(block, block)
    psi = prior.phi[idx]
    post = psi + _posterior_scatter(stats.n, stats.s_vec, stats.s_mat, prior)[idx]
    sign0, logdet0 = np.linalg.slogdet(psi)
    sign1, logdet1 = np.linalg.slogdet(post)
    if sign1 <= 0 or not np.isfinite(logdet1):
        raise NumericalError(f"posterior scale not positive definite on block {block}")
    nu = prior.block_dof(d)
    return float(
        _normaliser(d, stats.n, prior) + 0.5 * nu * logdet0 - 0.5 * (nu + stats.n) * logdet1
    )


def joint_log_block_marginal(
    stats_list: Sequence[SegmentStats], block: Sequence[int], prior: PriorSpec
) -> float:
    """Tempered sum of per-replicate block marginals (independent parameters per replicate)."""
    if len(stats_list) == 0:
        raise ConfigurationError("empty replicate list")
    total = sum(log_block_marginal(st, block, prior) for st in stats_list)
    return total / prior.temper_alpha


@dataclass
class BlockMarginals:
    """Vertex and pair log marginals for a batch of segments.

    ``vertex[k, i]`` is the log marginal of variable ``i`` on segment ``k`` and
    ``pair[k, i, j]`` that of block ``{i, j}`` (diagonal left at zero).
    """

    vertex: np.ndarray
    pair: np.ndarray = field(repr=False)


def batch_block_marginals(cum: CumulativeStats, start, stop, prior: PriorSpec) -> BlockMarginals:
    """All 1- and 2-dimensional block log marginals for segments ``[start, stop)`` (0-based)."""
    n, s_vec, s_mat = batch_segment_stats(cum, start, stop)
    post = prior.phi + _posterior_scatter(n, s_vec, s_mat, prior)
    p = prior.p
    diag = np.diagonal(post, axis1=-2, axis2=-1)
    phi_diag = np.diag(prior.phi)
    if np.any(diag <= 0):
        k, i = np.argwhere(diag <= 0)[0]
        raise NumericalError(
            f"segment [{int(start[k]) + 1}, {int(stop[k]) + 1}): non-positive scale on block [{i}]"
        )
    nu1 = prior.block_dof(1)
    vertex = (
        _normaliser(1, n, prior)[:, None]
        + 0.5 * nu1 * np.log(phi_diag)
        - 0.5 * (nu1 + n)[:, None] * np.log(diag)
    )
    det2 = diag[:, :, None] * diag[:, None, :] - post * post
    phi_det2 = phi_diag[:, None] * phi_diag[None, :] - prior.phi**2
    off = ~np.eye(p, dtype=bool)
    if np.any(det2[:, off] <= 0):
        k, i, j = np.argwhere((det2 <= 0) & off)[0]
        raise NumericalError(
            f"segment [{int(start[k]) + 1}, {int(stop[k]) + 1}): "
            f"posterior scale not positive definite on block [{i}, {j}]"
        )
    np.fill_diagonal(phi_det2, 1.0)
    det2[:, ~off] = 1.0
    nu2 = prior.block_dof(2)
    pair = (
        _normaliser(2, n, prior)[:, None, None]
        + 0.5 * nu2 * np.log(phi_det2)
        - 0.5 * (nu2 + n)[:, None, None] * np.log(det2)
    )
    pair[:, ~off] = 0.0
    return BlockMarginals(vertex, pair)


def batch_full_marginal(cum: CumulativeStats, start, stop, prior: PriorSpec) -> np.ndarray:
    """Log marginal of the full ``p``-dimensional block for each segment."""
    n, s_vec, s_mat = batch_segment_stats(cum, start, stop)
    post = prior.phi + _posterior_scatter(n, s_vec, s_mat, prior)
    sign, logdet = np.linalg.slogdet(post)
    if np.any(sign <= 0):
        k = int(np.argmax(sign <= 0))
        raise NumericalError(
            f"segment [{int(start[k]) + 1}, {int(stop[k]) + 1}): "
            "posterior scale not positive definite on the full block"
        )
    _, logdet0 = np.linalg.slogdet(prior.phi)
    nu = prior.alpha
    return _normaliser(prior.p, n, prior) + 0.5 * nu * logdet0 - 0.5 * (nu + n) * logdet


def data_driven_prior(data, alpha: float, **kwargs) -> tuple[Dataset, PriorSpec]:
    """Centre the data and set ``phi = (alpha - p - 1) * cov(data)``.

    The prior mean of the covariance then equals the sample covariance.
    Returns the centred dataset together with the prior.
    """
    if not isinstance(data, Dataset):
        data = Dataset(np.asarray(data, dtype=float))
    y = data.values
    centred = y - y.mean(axis=0)
    cov = np.cov(centred, rowvar=False)
    var = np.diag(cov)
    scale = max(float(np.abs(y).max()), 1.0)
    flat = np.flatnonzero(var <= (1e-12 * scale) ** 2)
    if flat.size:
        name = data.variable_names[flat[0]] if data.variable_names else None
        label = f"column {flat[0] + 1}" + (f" ({name})" if name else "")
        raise IngestionError(f"sample covariance is singular: {label} is constant")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise IngestionError("sample covariance is singular (collinear columns)") from None
    p = data.n_vars
    if not alpha > p + 1:
        raise ConfigurationError(f"data-driven prior needs alpha > p + 1 = {p + 1}")
    prior = PriorSpec(alpha=alpha, phi=(alpha - p - 1) * cov, mean_mode="zero", **kwargs)
    out = Dataset(centred, replicate_id=data.replicate_id, variable_names=data.variable_names)
    return out, prior
