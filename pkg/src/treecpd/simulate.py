"""Synthetic piecewise-stationary Gaussian graphical data and edge-recovery scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigurationError
from .marginals import Dataset

DEFAULT_FRACTIONS = (3 / 7, 1 / 7, 2 / 7, 1 / 7)


def make_rng(seed: int, index: Optional[int] = None) -> np.random.Generator:
    """Counter-based generator; ``index`` selects an independent sub-stream."""
    ss = np.random.SeedSequence(seed) if index is None else np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Scenario:
    structure: str = "tree"
    N: int = 210
    p: int = 10
    segment_fractions: tuple = DEFAULT_FRACTIONS
    p_C: Optional[float] = None
    seed: int = 0
    shared_structure: bool = False

    def __post_init__(self):
        if self.structure not in ("tree", "erdos-renyi"):
            raise ConfigurationError(f"unknown structure {self.structure!r}")
        if self.p < 2:
            raise ConfigurationError("p must be >= 2")
        fr = tuple(float(f) for f in self.segment_fractions)
        if not fr or any(f <= 0 for f in fr) or abs(sum(fr) - 1) > 1e-9:
            raise ConfigurationError(f"segment fractions must be positive and sum to 1, got {fr}")
        object.__setattr__(self, "segment_fractions", fr)
        if self.structure == "erdos-renyi":
            p_C = 2 / self.p if self.p_C is None else self.p_C
            if not 0 < p_C <= 1:
                raise ConfigurationError(f"p_C must lie in (0, 1], got {p_C}")
            object.__setattr__(self, "p_C", p_C)
        segment_lengths(self.N, fr)


def segment_lengths(N: int, fractions: Sequence[float]) -> list[int]:
    """Round cumulative fractions to boundaries; the last segment takes the remainder."""
    cum = np.cumsum(fractions)[:-1]
    cuts = [int(math.floor(N * c + 0.5)) for c in cum]
    bounds = [0] + cuts + [N]
    lengths = [b - a for a, b in zip(bounds, bounds[1:])]
    if any(n < 1 for n in lengths):
        raise ConfigurationError(f"fractions {list(fractions)} leave an empty segment for N={N}")
    return lengths


@dataclass
class GroundTruth:
    change_points: list
    adjacency_by_segment: list = field(repr=False)
    precision_by_segment: list = field(repr=False)

    def boundaries(self, N: int) -> list[int]:
        return [1] + list(self.change_points) + [N + 1]

    def adjacency_at(self, N: int) -> np.ndarray:
        """``(N, p, p)`` true adjacency at every time point."""
        bounds = self.boundaries(N)
        out = []
        for adj, a, b in zip(self.adjacency_by_segment, bounds, bounds[1:]):
            out.extend([adj] * (b - a))
        return np.array(out)


def sample_uniform_spanning_tree(p: int, rng: np.random.Generator) -> np.ndarray:
    """Aldous-Broder random walk on ``K_p``: exactly uniform over the ``p^(p-2)`` trees."""
    if p < 2:
        raise ConfigurationError("p must be >= 2")
    adj = np.zeros((p, p), dtype=int)
    current = int(rng.integers(p))
    visited = {current}
    while len(visited) < p:
        step = int(rng.integers(p - 1))
        nxt = step if step < current else step + 1
        if nxt not in visited:
            visited.add(nxt)
            adj[current, nxt] = adj[nxt, current] = 1
        current = nxt
    return adj


def sample_erdos_renyi(p: int, p_C: float, rng: np.random.Generator) -> np.ndarray:
    if p < 2:
        raise ConfigurationError("p must be >= 2")
    upper = np.triu(rng.random((p, p)) < p_C, k=1).astype(int)
    return upper + upper.T


def graph_to_precision(adjacency) -> np.ndarray:
    """Laplacian plus identity, rescaled so the implied covariance has unit diagonal."""
    adj = np.asarray(adjacency, dtype=float)
    lap = np.diag(adj.sum(axis=1)) - adj
    prec0 = lap + np.eye(adj.shape[0])
    scale = np.sqrt(np.diag(np.linalg.inv(prec0)))
    return prec0 * scale[:, None] * scale[None, :]


def draw_structures(scenario: Scenario, rng: np.random.Generator) -> list[np.ndarray]:
    """One adjacency matrix per segment."""
    n_seg = len(scenario.segment_fractions)
    if scenario.structure == "tree":
        return [sample_uniform_spanning_tree(scenario.p, rng) for _ in range(n_seg)]
    return [sample_erdos_renyi(scenario.p, scenario.p_C, rng) for _ in range(n_seg)]


def generate_dataset(scenario: Scenario, index: Optional[int] = None) -> tuple[Dataset, GroundTruth]:
    """Draw structures, precisions and observations for every segment.

    With ``shared_structure`` the structures come from the scenario seed alone,
    so every ``index`` shares one structure series and only the observations
    differ.
    """
    rng = make_rng(scenario.seed, index)
    if scenario.shared_structure:
        adjs = draw_structures(scenario, make_rng(scenario.seed))
    else:
        adjs = draw_structures(scenario, rng)
    lengths = segment_lengths(scenario.N, scenario.segment_fractions)
    blocks, precs = [], []
    for n, adj in zip(lengths, adjs):
        prec = graph_to_precision(adj)
        chol = np.linalg.cholesky(np.linalg.inv(prec))
        blocks.append(rng.standard_normal((n, scenario.p)) @ chol.T)
        precs.append(prec)
    change_points = list(np.cumsum(lengths)[:-1] + 1)
    names = [f"V{i + 1}" for i in range(scenario.p)]
    data = Dataset(np.vstack(blocks), replicate_id=None if index is None else str(index), variable_names=names)
    return data, GroundTruth([int(c) for c in change_points], adjs, precs)


def auc_roc(scores, truth) -> float:
    """Area under the ROC curve over the upper-triangle pairs, ties at mid-rank."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth)
    p = scores.shape[0]
    if p < 3:
        raise ConfigurationError("AUC needs p >= 3")
    iu = np.triu_indices(p, k=1)
    s, y = scores[iu], truth[iu] != 0
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise ConfigurationError("AUC undefined: truth has no present or no absent edge")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))
