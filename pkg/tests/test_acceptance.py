"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Two criteria are not met by this implementation; their tests are marked as
strict expected failures and the reasons are spelled out in the marks.
"""

import math
import time

import numpy as np
import pytest

from oracles import (
    bivariate_quadrature,
    enumerate_posteriors,
    enumerate_tree_sum,
    gamma_quadrature,
    monte_carlo_block,
)
from treecpd.cli import RunConfig, cmd_detect, local_maxima
from treecpd.dataio import write_matrix_csv
from treecpd.edges import edge_prob_over_time, edge_status_comparison
from treecpd.likelihood import SegmentModel, SegmentPrior
from treecpd.marginals import PriorSpec, log_block_marginal, prefix_stats, segment_stats
from treecpd.segmentation import (
    KPrior,
    changepoint_posteriors,
    count_segmentations,
    dp_tables,
    log_evidence,
    map_segmentations,
    segment_posteriors,
    segmentation_constant,
    summarize,
)
from treecpd.simulate import Scenario, auc_roc, generate_dataset
from treecpd.trees import EdgeWeightMatrix, edge_posterior, log_tree_partition


def test_criterion_01_cayley(criterion):
    t0 = time.perf_counter()
    errors = [abs(log_tree_partition(EdgeWeightMatrix.uniform(p)) - (p - 2) * math.log(p)) for p in range(2, 10)]
    count10 = math.exp(log_tree_partition(EdgeWeightMatrix.uniform(10)))
    elapsed = time.perf_counter() - t0
    ok = max(errors) < 1e-9 and round(count10) == 10**8 and elapsed < 1.0
    criterion(1, ok, f"max |err| p=2..9 {max(errors):.1e}, p=10 count {count10:.6e}, {elapsed:.3f}s")
    assert max(errors) < 1e-9
    assert round(count10) == 10**8
    assert elapsed < 1.0


def test_criterion_02_tree_enumeration(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_z = worst_p = 0.0
    for k in range(100):
        p = 3 + k % 4
        x = np.triu(rng.normal(scale=2.0, size=(p, p)), 1)
        log_w = x + x.T
        want_z, want_prob = enumerate_tree_sum(log_w)
        got = edge_posterior(EdgeWeightMatrix(log_w))
        worst_z = max(worst_z, abs(got.log_Z - want_z) / abs(want_z))
        off = ~np.eye(p, dtype=bool)
        worst_p = max(worst_p, np.max(np.abs(got.edge_prob[off] - want_prob[off]) / want_prob[off]))
    elapsed = time.perf_counter() - t0
    ok = worst_z < 1e-8 and worst_p < 1e-8 and elapsed < 30
    criterion(2, ok, f"worst rel err log Z {worst_z:.1e}, edge prob {worst_p:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_03_segmentation_enumeration(criterion):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    map_ok = True
    for _ in range(50):
        N = int(rng.integers(4, 13))
        p = int(rng.integers(2, 5))
        y = rng.normal(size=(N, p)) * rng.uniform(0.5, 3.0, size=p)
        mean_mode = str(rng.choice(["zero", "unknown"]))
        log_A = SegmentModel(y, PriorSpec.default(p, mean_mode=mean_mode)).build_A().log_A
        K_max = min(4, N)
        tables = dp_tables(log_A, K_max)
        maps = map_segmentations(log_A, K_max)
        for K in range(1, K_max + 1):
            total, B, S, best, best_score, count = enumerate_posteriors(log_A, K)
            ev = log_evidence(tables, K)
            worst = max(worst, abs(ev - (total - math.log(count))) / max(1.0, abs(ev)))
            B_Kk, B_K = changepoint_posteriors(tables, K)
            worst = max(worst, np.abs(B_Kk - B).max(initial=0.0), np.abs(B_K - B.sum(axis=0)).max())
            worst = max(worst, np.abs(segment_posteriors(tables, K) - S.sum(axis=0)).max())
            map_ok &= maps[K - 1].boundaries == best
            worst = max(worst, abs(maps[K - 1].log_value - best_score) / max(1.0, abs(best_score)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and map_ok and elapsed < 60
    criterion(3, ok, f"worst deviation {worst:.1e}, MAP identical {map_ok}, {elapsed:.1f}s")
    assert ok


def test_criterion_04_combinatorial_constants(criterion):
    exact = all(
        count_segmentations(N, K) == math.comb(N - 1, K - 1)
        and round(math.exp(segmentation_constant(SegmentPrior(), N, K))) == math.comb(N - 1, K - 1)
        for N in range(1, 31)
        for K in range(1, min(N, 10) + 1)
    )
    big = count_segmentations(210, 4)
    ok = exact and big == 1_499_784
    criterion(4, ok, f"binomial table exact {exact}, N=210 K=4 gives {big:,}")
    assert ok


def random_config(rng, n):
    p = int(rng.integers(2, 5))
    alpha = p + 1 + rng.uniform(0.5, 8)
    A = rng.normal(size=(p, p))
    prior = PriorSpec(alpha=alpha, phi=A @ A.T + p * np.eye(p))
    y = rng.normal(size=(n, p)) * rng.uniform(0.5, 2.0)
    return p, prior, y


def test_criterion_05_block_marginals(criterion):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    quad_err = []
    z_scores = []
    for d in (1, 2):
        for _ in range(5):
            p, prior, y = random_config(rng, int(rng.integers(1, 9)))
            block = sorted(rng.choice(p, size=d, replace=False).tolist())
            st = segment_stats(prefix_stats(y), 1, len(y) + 1)
            got = log_block_marginal(st, block, prior)
            nu = prior.alpha - p + d
            sub = prior.phi[np.ix_(block, block)]
            want = gamma_quadrature(y[:, block[0]], nu, sub[0, 0]) if d == 1 else bivariate_quadrature(y[:, block], nu, sub)
            quad_err.append(abs(got - want) / abs(want))
        for _ in range(5):
            p, prior, y = random_config(rng, 5)
            block = sorted(rng.choice(p, size=d, replace=False).tolist())
            got = log_block_marginal(segment_stats(prefix_stats(y), 1, 6), block, prior)
            ratio = np.exp(monte_carlo_block(y, block, prior, 10**6, rng) - got)
            z_scores.append(abs(ratio.mean() - 1) / (ratio.std() / math.sqrt(len(ratio))))
    elapsed = time.perf_counter() - t0
    ok = max(quad_err) < 1e-6 and max(z_scores) <= 3 and elapsed < 300
    criterion(5, ok, f"worst quadrature rel err {max(quad_err):.1e}, worst MC |z| {max(z_scores):.2f}, {elapsed:.0f}s")
    assert ok


def test_criterion_06_backend_identity_p2(criterion):
    rng = np.random.default_rng(6)
    y = rng.normal(size=(20, 2)) @ np.array([[1.0, 0.5], [0.0, 0.7]])
    worst = 0.0
    same_support = True
    for mean_mode in ("zero", "unknown"):
        tree = SegmentModel(y, PriorSpec.default(2, mean_mode=mean_mode)).build_A().log_A
        full = SegmentModel(y, PriorSpec.default(2, mean_mode=mean_mode, backend="full")).build_A().log_A
        finite = np.isfinite(tree)
        same_support &= bool(np.array_equal(finite, np.isfinite(full))) and finite.sum() == 210
        worst = max(worst, np.abs(tree[finite] - full[finite]).max())
    ok = same_support and worst <= 1e-10
    criterion(6, ok, f"210 segments per mode, max |log diff| {worst:.1e}")
    assert ok


def normalization_errors(model, kprior, lam=(0.25, 0.5, 0.25)):
    """Largest deviation of every probability identity for one pipeline run."""
    N, p = model.N, model.p
    s = summarize(model.build_A(), kprior)
    errs = {"p(K|y)": abs(s.posterior_K.sum() - 1)}
    errs["B_Kk"] = max([np.abs(s.B_Kk[K].sum(axis=1) - 1).max() for K in s.B_Kk] + [0.0])
    cover = 0.0
    for K in range(1, s.K_max + 1):
        S = s.S_K(K)
        cover = max(cover, max(abs(S[:u, u:].sum() - 1) for u in range(1, N + 1)))
    errs["S_K cover"] = cover
    iu = np.triu_indices(p, k=1)
    K_edge = min(4, s.K_max)
    tensor = edge_prob_over_time(model, s.S_K(K_edge), K_edge, floor=0.0).probs
    hand = np.abs(tensor[:, iu[0], iu[1]].sum(axis=1) - (p - 1)).max()
    m = s.map_by_K[K_edge - 1]
    for a, b in zip(m.boundaries, m.boundaries[1:]):
        hand = max(hand, abs(model.segment_edge_posterior(a, b)[iu].sum() - (p - 1)))
    errs["handshake"] = hand
    eps = edge_status_comparison(model, list(m.change_points), lam).posterior[iu]
    errs["eps triples"] = np.abs(eps.sum(axis=-1) - 1).max()
    return errs


def test_criterion_07_normalization_suite(criterion):
    runs = []
    for seed in range(3):
        data, _ = generate_dataset(Scenario(N=60, p=5, seed=seed))
        runs.append((SegmentModel(data.values, PriorSpec.default(5)), KPrior("poisson", K_max=6, gamma=4)))
    data, _ = generate_dataset(Scenario(structure="erdos-renyi", N=50, p=6, seed=3))
    runs.append((SegmentModel(data.values, PriorSpec.default(6, mean_mode="unknown"), seg_prior=SegmentPrior(L_min=3)), KPrior("uniform", K_max=5)))
    sc = Scenario(N=40, p=4, seed=4, shared_structure=True)
    reps = [generate_dataset(sc, index=u)[0].values for u in range(3)]
    runs.append((SegmentModel(reps, PriorSpec.default(4, temper_alpha=3.0)), KPrior("poisson", K_max=5, gamma=3)))
    worst = {}
    for model, kprior in runs:
        for key, val in normalization_errors(model, kprior).items():
            worst[key] = max(worst.get(key, 0.0), float(val))
    ok = max(worst.values()) < 1e-8
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    criterion(7, ok, f"{len(runs)} runs, worst: {detail}")
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason=(
        "part (a) is not reached: with a 0.05 peak-height floor, B(t) has a peak within +-3 "
        "of every true change point for well under 80% of datasets, because the short 30-point "
        "segments between tree structures drawn independently are often not separated"
    ),
)
def test_criterion_08_recovery_at_desk_scale(criterion):
    t0 = time.perf_counter()
    sc = Scenario(N=210, p=10, seed=2024)
    hits, khat, aucs = [], [], []
    for index in range(20):
        data, truth = generate_dataset(sc, index=index)
        model = SegmentModel(data.values, PriorSpec.default(10))
        s = summarize(model.build_A(), KPrior("poisson", K_max=10, gamma=4))
        peaks = local_maxima(s.B, 0.05)
        hits.append(all(any(abs(pk - c) <= 3 for pk in peaks) for c in truth.change_points))
        khat.append(s.K_hat_1)
        T = edge_prob_over_time(model, s.S_K(4), 4).probs
        bounds = truth.boundaries(210)
        aucs.extend(
            auc_roc(T[(a + b) // 2 - 1], adj)
            for (a, b), adj in zip(zip(bounds, bounds[1:]), truth.adjacency_by_segment)
        )
    elapsed = time.perf_counter() - t0
    frac_a = float(np.mean(hits))
    frac_b = float(np.mean([k in (3, 4, 5) for k in khat]))
    auc = float(np.mean(aucs))
    ok = frac_a >= 0.8 and frac_b >= 0.8 and auc >= 0.85
    criterion(
        8,
        ok,
        f"(a) peaks near all change points {frac_a:.2f} (need 0.80), "
        f"(b) K_hat_1 in 3..5 {frac_b:.2f}, (c) mean mid-segment AUC {auc:.3f}, {elapsed:.0f}s",
    )
    assert frac_b >= 0.8 and auc >= 0.85, "parts (b) and (c) are expected to hold"
    assert frac_a >= 0.8


def tempered_maps(y, log_table, backend, alpha):
    prior = PriorSpec.default(y[0].shape[1] if isinstance(y, list) else y.shape[1], backend=backend, temper_alpha=alpha)
    model = SegmentModel(y, prior, seg_prior=SegmentPrior("custom", log_table=log_table))
    return [m.boundaries for m in map_segmentations(model.build_A().log_A, 4)]


@pytest.mark.xfail(
    strict=True,
    reason=(
        "holds for the full backend only: with trees the tempering acts on each tree's "
        "likelihood inside the sum over trees, so log A is not a fixed multiple of the "
        "untempered log A and the MAP can move"
    ),
)
def test_criterion_09_tempering_mode_invariance(criterion):
    changed = {"full": 0, "tree": 0}
    for inst in range(10):
        sc = Scenario(N=12, p=4, segment_fractions=(0.5, 0.5), seed=inst, shared_structure=True)
        reps = [generate_dataset(sc, index=u)[0].values for u in range(3)]
        log_table = np.random.default_rng(900 + inst).normal(size=(13, 13))
        for backend in changed:
            maps = [tempered_maps(reps, log_table, backend, a) for a in (1.0, 10.0, 20.0)]
            changed[backend] += not (maps[0] == maps[1] == maps[2])
    ok = changed["full"] == 0 and changed["tree"] == 0
    criterion(
        9,
        ok,
        f"MAP for K=1..4 unchanged across alpha in (1, 10, 20): full backend {10 - changed['full']}/10, "
        f"tree backend {10 - changed['tree']}/10",
    )
    assert changed["full"] == 0, "the full backend scales log A uniformly"
    assert changed["tree"] == 0


def test_criterion_10_complexity_scaling(criterion, tmp_path):
    paths = {}
    for N in (100, 200):
        data, _ = generate_dataset(Scenario(N=N, p=10, seed=5))
        paths[N] = tmp_path / f"data{N}.csv"
        write_matrix_csv(paths[N], data.values, header=data.variable_names)

    def run(N):
        # a fixed K for the edge sweep and no probability floor keep the work data-independent
        cfg = RunConfig(data=[str(paths[N])], output_dir=str(tmp_path / f"out{N}"), k_max=10, edge_time_k="4", s_k_floor=0.0)
        t = time.perf_counter()
        cmd_detect(cfg)
        return time.perf_counter() - t

    run(100)
    # interleaved so that machine load drifts affect both sizes alike
    times = [(run(100), run(200)) for _ in range(7)]
    small = min(a for a, _ in times)
    large = min(b for _, b in times)
    ratio = large / small
    ok = 3.2 <= ratio <= 4.8
    criterion(10, ok, f"N=100 {small:.2f}s, N=200 {large:.2f}s, ratio {ratio:.2f} (need 3.2..4.8)")
    assert ok
