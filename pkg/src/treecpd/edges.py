"""Edge-level posteriors through time and across the segments of a fixed segmentation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, UnsupportedOperation
from .likelihood import SegmentModel
from .trees import batch_edge_posterior, batch_log_tree_partition

log = logging.getLogger(__name__)

SKIPPED_MASS_WARNING = 1e-6


@dataclass
class EdgeTimeTensor:
    """``probs[t-1, i, j]``: posterior probability of edge ``{i, j}`` at time ``t`` given ``K``."""

    probs: np.ndarray
    K: int
    skipped_mass: float = 0.0
    warning: str | None = None


def edge_prob_over_time(
    model: SegmentModel, S_K: np.ndarray, K: int, floor: float = 1e-12
) -> EdgeTimeTensor:
    """Average the per-segment edge posteriors with the segment posteriors ``S_K``.

    Segments with ``S_K(r) < floor`` are skipped; the largest per-time skipped
    mass is reported.
    """
    if model.backend != "tree":
        raise UnsupportedOperation("edge probabilities over time need the tree backend")
    N, p = model.N, model.p
    start, stop = model.admissible_pairs()
    weight = S_K[start, stop]
    keep = weight >= floor
    probs = np.zeros((N, p, p))
    skipped = np.zeros(N)
    k_start, k_stop, k_weight = start[keep], stop[keep], weight[keep]
    post = model.batch_edge_posteriors(k_start, k_stop) if keep.any() else None
    # contributions to time u from segments [s0, t0) with t0 > u are reverse
    # cumulative sums over t0, so everything is accumulated with positive terms
    bounds = np.searchsorted(k_start, np.arange(N + 1))
    s_start, s_stop, s_weight = start[~keep], stop[~keep], weight[~keep]
    s_bounds = np.searchsorted(s_start, np.arange(N + 1))
    for s0 in range(N):
        lo, hi = bounds[s0], bounds[s0 + 1]
        if hi > lo:
            stops = k_stop[lo:hi]
            contrib = np.zeros((N + 1 - s0, p, p))
            contrib[stops - s0] = k_weight[lo:hi, None, None] * post[lo:hi]
            acc = np.cumsum(contrib[::-1], axis=0)[::-1]
            probs[s0:] += acc[1:]
        lo, hi = s_bounds[s0], s_bounds[s0 + 1]
        if hi > lo:
            contrib = np.zeros(N + 1 - s0)
            contrib[s_stop[lo:hi] - s0] = s_weight[lo:hi]
            skipped[s0:] += np.cumsum(contrib[::-1])[::-1][1:]
    mass = float(skipped.max()) if N else 0.0
    warning = None
    if mass > SKIPPED_MASS_WARNING:
        warning = f"segments below the S_K floor {floor:g} carry up to {mass:.3g} posterior mass"
        log.warning(warning)
    return EdgeTimeTensor(probs, K, mass, warning)


def _boundaries(model: SegmentModel, change_points: Sequence[int]) -> list[int]:
    cps = [int(c) for c in change_points]
    bounds = [1] + cps + [model.N + 1]
    if any(b <= a for a, b in zip(bounds, bounds[1:])):
        raise ConfigurationError(
            f"change points must be strictly increasing within 2..{model.N}, got {cps}"
        )
    L = model.seg_prior.L_min
    if any(b - a < L for a, b in zip(bounds, bounds[1:])):
        raise ConfigurationError(f"segmentation has a segment shorter than L_min={L}")
    return bounds


def _segment_log_omegas(model: SegmentModel, bounds: list[int]) -> np.ndarray:
    start = np.array(bounds[:-1]) - 1
    stop = np.array(bounds[1:]) - 1
    log_omega, _ = model.batch_log_omega(start, stop)
    return log_omega


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x <= 0``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > -math.log(2), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


@dataclass
class EdgeStatusPosterior:
    """Posterior of the status variable of every edge.

    ``posterior[i, j]`` is ``(P(always absent), P(changes), P(always present))``
    and ``lam`` the matching prior triple.  ``q0`` and ``q`` hold the prior and
    posterior probabilities of the same three events under the plain tree model.
    """

    posterior: np.ndarray
    lam: tuple
    q0: np.ndarray
    q: np.ndarray
    trivial: bool = False


def _event_logs(P: np.ndarray, K: int) -> np.ndarray:
    """Log probabilities of (absent in all, mixed, present in all) from per-segment ``P``."""
    with np.errstate(divide="ignore"):
        log_in = np.log(P).sum(axis=0)
        log_out = np.log1p(-np.clip(P, 0.0, 1.0)).sum(axis=0)
    both = np.logaddexp(log_in, log_out)
    mixed = _log1mexp(np.minimum(both, 0.0)) if K > 1 else np.full_like(both, -np.inf)
    return np.stack([log_out, mixed, log_in], axis=-1)


def edge_status_comparison(
    model: SegmentModel, change_points: Sequence[int], lam=(0.25, 0.5, 0.25)
) -> EdgeStatusPosterior:
    """Posterior over (absent throughout, changes, present throughout) for each edge."""
    lam = tuple(float(x) for x in lam)
    if len(lam) != 3 or any(x <= 0 for x in lam) or abs(sum(lam) - 1) > 1e-9:
        raise ConfigurationError(f"lambda must be three positive numbers summing to 1, got {lam}")
    if model.backend != "tree":
        raise UnsupportedOperation("edge status comparison needs the tree backend")
    bounds = _boundaries(model, change_points)
    K = len(bounds) - 1
    P_seg = batch_edge_posterior(_segment_log_omegas(model, bounds))
    P_prior = np.broadcast_to(batch_edge_posterior(model.b.log_w), P_seg.shape)
    log_q0 = _event_logs(P_prior, K)
    log_q = _event_logs(P_seg, K)
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isfinite(log_q0), log_q - log_q0, -np.inf)
    comp = np.log(lam) + ratio
    m = comp.max(axis=-1, keepdims=True)
    w = np.exp(comp - m)
    post = w / w.sum(axis=-1, keepdims=True)
    eye = np.eye(model.p, dtype=bool)
    post[eye] = np.nan
    trivial = K == 1
    if trivial:
        log.warning("single-segment comparison is trivial: the 'changes' status is impossible")
    return EdgeStatusPosterior(post, lam, np.exp(log_q0), np.exp(log_q), trivial)


@dataclass
class StructureComparisonPosterior:
    pi_star: float
    pi: float
    q0: float
    q: float
    trivial: bool = False


def structure_comparison(
    model: SegmentModel, change_points: Sequence[int], pi: float = 0.5
) -> StructureComparisonPosterior:
    """Posterior probability that one tree governs every segment."""
    if not 0 < pi < 1:
        raise ConfigurationError(f"pi must lie in (0, 1), got {pi}")
    if model.backend != "tree":
        raise UnsupportedOperation("structure comparison needs the tree backend")
    bounds = _boundaries(model, change_points)
    K = len(bounds) - 1
    if K == 1:
        log.warning("single-segment comparison is trivial: returning pi* = 1")
        return StructureComparisonPosterior(1.0, pi, 1.0, 1.0, trivial=True)
    log_b = model.b.log_w
    log_q0 = min(float(batch_log_tree_partition(K * log_b)) - K * model.log_Zb, 0.0)
    if model.p == 2:
        # a single spanning tree exists, so every segment shares it
        return StructureComparisonPosterior(1.0, pi, 1.0, 1.0, trivial=True)
    omegas = _segment_log_omegas(model, bounds)
    log_q = float(batch_log_tree_partition(omegas.sum(axis=0))) - float(
        batch_log_tree_partition(omegas).sum()
    )
    log_q = min(log_q, 0.0)
    same = math.log(pi) + log_q - log_q0
    diff = math.log1p(-pi) + float(_log1mexp(log_q)) - float(_log1mexp(log_q0))
    pi_star = 1.0 / (1.0 + math.exp(diff - same)) if diff - same < 700 else 0.0
    return StructureComparisonPosterior(pi_star, pi, math.exp(log_q0), math.exp(log_q))
