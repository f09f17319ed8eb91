"""Command-line interface: ``treecpd {detect, simulate, compare, evaluate}``.

Settings are resolved in the order defaults < JSON config file < environment
(output directory only) < command-line flags, and the resolved configuration
is written next to every result so a run can be repeated from it alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dataio import (
    read_json,
    read_long,
    read_replicates,
    write_json,
    write_long,
    write_matrix_csv,
    write_table,
)
from .edges import edge_prob_over_time, edge_status_comparison, structure_comparison
from .errors import ConfigurationError, IngestionError, TreeCPDError
from .likelihood import SegmentModel, SegmentPrior
from .marginals import Dataset, PriorSpec, data_driven_prior
from .segmentation import KPrior, summarize
from .simulate import Scenario, auc_roc, generate_dataset
from .trees import EdgeWeightMatrix

log = logging.getLogger("treecpd")

OUTPUT_ENV = "TREECPD_OUTPUT_DIR"


@dataclass
class RunConfig:
    """Every run option with its default. ``None`` means "derived from the data"."""

    data: list = field(default_factory=list)
    output_dir: str = "treecpd-out"
    # prior on covariances
    prior: str = "naive"  # naive: phi = (alpha - p - 1) I; data-driven: (alpha - p - 1) cov(y)
    alpha: Optional[float] = None  # default p + 10
    mean_mode: str = "zero"
    kappa0: float = 1.0
    mu0: Optional[list] = None
    backend: str = "tree"
    temper_alpha: Optional[float] = None  # default 1, or U with U > 1 replicates
    standardize: bool = False
    # priors on segmentations and structures
    l_min: int = 1
    segment_weights: Optional[str] = None  # CSV of (N+1)x(N+1) log-weights; uniform if unset
    k_prior: str = "poisson"
    gamma: float = 4.0
    k_max: int = 10
    edge_prior: Optional[str] = None  # CSV of p x p positive weights; uniform if unset
    # outputs
    edge_time_k: Optional[str] = "khat1"  # "khat1", "khat2", "none" or an integer
    s_k_floor: float = 1e-12
    segment_table_min: float = 1e-12
    # comparison
    change_points: Optional[list] = None
    lam: list = field(default_factory=lambda: [0.25, 0.5, 0.25])
    pi: float = 0.5
    # simulation
    structure: str = "tree"
    n: int = 210
    p: int = 10
    fractions: list = field(default_factory=lambda: [3 / 7, 1 / 7, 2 / 7, 1 / 7])
    p_c: Optional[float] = None
    replicates: int = 1
    shared_structure: bool = False
    seed: int = 0
    # evaluation
    result_dir: Optional[str] = None
    truth: Optional[str] = None
    peak_threshold: float = 0.05
    threads: int = 1

    @classmethod
    def field_names(cls) -> set:
        return {f.name for f in dataclasses.fields(cls)}


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    raw = read_json(path)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    unknown = set(raw) - RunConfig.field_names()
    if unknown:
        raise ConfigurationError(f"{path}: unknown config keys {sorted(unknown)}")
    return raw


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = load_config(getattr(args, "config", None))
    env_out = os.environ.get(OUTPUT_ENV)
    if env_out:
        values["output_dir"] = env_out
    for name in RunConfig.field_names():
        flag = getattr(args, name, None)
        if flag is not None and not (name == "data" and flag == []):
            values[name] = flag
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.prior not in ("naive", "data-driven"):
        raise ConfigurationError(f"prior must be 'naive' or 'data-driven', got {cfg.prior!r}")
    if cfg.k_prior not in ("poisson", "uniform"):
        raise ConfigurationError(f"k_prior must be 'poisson' or 'uniform', got {cfg.k_prior!r}")
    if cfg.k_max < 1 or cfg.l_min < 1 or cfg.threads < 1:
        raise ConfigurationError("k_max, l_min and threads must be >= 1")
    if len(cfg.lam) != 3:
        raise ConfigurationError(f"lambda needs three values, got {cfg.lam}")


def _edge_k_choice(cfg: RunConfig, summary) -> Optional[int]:
    choice = str(cfg.edge_time_k).lower()
    if choice == "none":
        return None
    if choice == "khat1":
        return summary.K_hat_1
    if choice == "khat2":
        return summary.K_hat_2
    try:
        K = int(choice)
    except ValueError:
        raise ConfigurationError(f"edge_time_k must be khat1, khat2, none or an integer, got {cfg.edge_time_k!r}") from None
    if not 1 <= K <= summary.K_max:
        raise ConfigurationError(f"edge_time_k={K} outside 1..{summary.K_max}")
    return K


@dataclass
class PreparedModel:
    model: SegmentModel
    datasets: list
    K_max: int
    temper_alpha: float
    notes: list


def _standardize(datasets: list[Dataset]) -> list[Dataset]:
    pooled = np.vstack([d.values for d in datasets])
    mu, sd = pooled.mean(axis=0), pooled.std(axis=0, ddof=1)
    if np.any(sd == 0):
        raise IngestionError(f"cannot standardise: column {int(np.flatnonzero(sd == 0)[0]) + 1} is constant")
    return [dataclasses.replace(d, values=(d.values - mu) / sd) for d in datasets]


def _read_square_csv(path: str, size: int, what: str) -> np.ndarray:
    try:
        ds = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"{what} file {path}: {exc}") from None
    if ds.shape != (size, size):
        raise ConfigurationError(f"{what} file {path} has shape {ds.shape}, expected {(size, size)}")
    return ds


def prepare_model(cfg: RunConfig) -> PreparedModel:
    if not cfg.data:
        raise ConfigurationError("no input data: pass CSV files, a directory, or set 'data' in the config")
    datasets = read_replicates(cfg.data)
    notes = []
    U = len(datasets)
    N, p = datasets[0].values.shape
    if cfg.standardize:
        datasets = _standardize(datasets)
    alpha = float(cfg.alpha) if cfg.alpha is not None else p + 10.0
    temper = cfg.temper_alpha if cfg.temper_alpha is not None else float(U)
    if U > 1 and cfg.temper_alpha is None:
        notes.append(f"replicate mode: likelihood tempered with temper_alpha = U = {U}")
    kw = dict(mean_mode=cfg.mean_mode, kappa0=cfg.kappa0, backend=cfg.backend, temper_alpha=float(temper))
    if cfg.mu0 is not None:
        kw["mu0"] = np.asarray(cfg.mu0, dtype=float)
    if cfg.prior == "data-driven":
        if cfg.mean_mode != "zero":
            raise ConfigurationError("the data-driven prior centres the data and needs mean_mode 'zero'")
        pooled = Dataset(np.vstack([d.values for d in datasets]), variable_names=datasets[0].variable_names)
        centred, prior = data_driven_prior(pooled, alpha, **{k: v for k, v in kw.items() if k != "mean_mode"})
        mean = pooled.values.mean(axis=0)
        datasets = [dataclasses.replace(d, values=d.values - mean) for d in datasets]
    else:
        prior = PriorSpec(alpha=alpha, phi=(alpha - p - 1) * np.eye(p), **kw)
    b = None
    if cfg.edge_prior:
        b = EdgeWeightMatrix.from_weights(_read_square_csv(cfg.edge_prior, p, "edge prior") + np.eye(p))
    if cfg.segment_weights:
        seg_prior = SegmentPrior("custom", cfg.l_min, _read_square_csv(cfg.segment_weights, N + 1, "segment weight"))
    else:
        seg_prior = SegmentPrior("uniform", cfg.l_min)
    K_max = min(cfg.k_max, N // cfg.l_min)
    if K_max < cfg.k_max:
        notes.append(f"k_max lowered from {cfg.k_max} to {K_max} = N // l_min")
    model = SegmentModel([d.values for d in datasets], prior, b, seg_prior)
    return PreparedModel(model, datasets, K_max, float(temper), notes)


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(cfg: RunConfig, command: str) -> dict:
    return {"command": command, **dataclasses.asdict(cfg)}


def _data_info(prep: PreparedModel) -> dict:
    d0 = prep.datasets[0]
    return {
        "files": [str(d.replicate_id) for d in prep.datasets],
        "N": prep.model.N,
        "p": prep.model.p,
        "replicates": len(prep.datasets),
        "variable_names": d0.variable_names or [f"V{i + 1}" for i in range(prep.model.p)],
        "temper_alpha": prep.temper_alpha,
    }


def cmd_detect(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    prep = prepare_model(cfg)
    model = prep.model
    N, p = model.N, model.p
    A = model.build_A(threads=cfg.threads)
    kprior = KPrior(cfg.k_prior, K_max=prep.K_max, gamma=cfg.gamma)
    log_a = model.seg_prior.log_weights(N) / prep.temper_alpha
    summary = summarize(A, kprior, log_a=np.where(np.isfinite(A.log_A), log_a, -np.inf))
    out = _output_dir(cfg)
    warnings = list(prep.notes)

    Ks = list(range(1, summary.K_max + 1))
    write_table(
        out / "posterior_K.csv",
        ["K", "log_evidence", "posterior", "map_log_joint"],
        [(K, summary.log_evidence_by_K[K - 1], summary.posterior_K[K - 1], summary.map_log_joint_by_K[K - 1]) for K in Ks],
        int_cols=1,
    )
    wide = [summary.B] + [summary.B_K[K] for K in Ks if K >= 2]
    write_long(
        out / "changepoints.csv",
        ["t", "B"] + [f"B_K{K}" for K in Ks if K >= 2],
        np.arange(1, N + 1),
        np.column_stack(wide),
    )
    rows_k, rows_v = [], []
    for K in Ks[1:]:
        for k in range(1, K):
            rows_k.append(np.column_stack([np.full(N, K), np.full(N, k), np.arange(1, N + 1)]))
            rows_v.append(summary.B_Kk[K][k - 1])
    write_long(
        out / "changepoints_by_k.csv",
        ["K", "k", "t", "prob"],
        np.vstack(rows_k) if rows_k else np.zeros((0, 3)),
        np.concatenate(rows_v) if rows_v else np.zeros(0),
    )
    seg_k, seg_v = [], []
    for K in Ks:
        S = summary.S_K(K)
        s, t = np.nonzero(S >= cfg.segment_table_min)
        seg_k.append(np.column_stack([np.full(len(s), K), s + 1, t + 1]))
        seg_v.append(S[s, t])
    write_long(out / "segments.csv", ["K", "s", "t", "prob"], np.vstack(seg_k), np.concatenate(seg_v))

    edge_info = None
    if model.backend == "tree":
        K_edge = _edge_k_choice(cfg, summary)
        if K_edge is not None:
            tensor = edge_prob_over_time(model, summary.S_K(K_edge), K_edge, floor=cfg.s_k_floor)
            iu, ju = np.triu_indices(p, k=1)
            keys = np.column_stack(
                [np.repeat(np.arange(1, N + 1), len(iu)), np.tile(iu + 1, N), np.tile(ju + 1, N)]
            )
            write_long(out / "edge_time.csv", ["t", "i", "j", "prob"], keys, tensor.probs[:, iu, ju].ravel())
            edge_info = {"K": K_edge, "floor": cfg.s_k_floor, "skipped_mass": tensor.skipped_mass}
            if tensor.warning:
                warnings.append(tensor.warning)
        seg_rows = []
        for label, m in (("khat1", summary.map_by_K[summary.K_hat_1 - 1]), ("khat2", summary.global_map)):
            for r, (s, t) in enumerate(zip(m.boundaries, m.boundaries[1:]), start=1):
                P = model.segment_edge_posterior(s, t)
                for i, j in zip(*np.triu_indices(p, k=1)):
                    seg_rows.append((m.K, r, s, t, i + 1, j + 1, P[i, j]))
        write_table(out / "segment_edges.csv", ["K", "segment", "s", "t", "i", "j", "prob"], sorted(set(seg_rows)), int_cols=6)

    result = {
        "treecpd_version": __version__,
        "data": _data_info(prep),
        "K_max": summary.K_max,
        "log_evidence_by_K": summary.log_evidence_by_K,
        "posterior_K": summary.posterior_K,
        "K_hat_1": summary.K_hat_1,
        "K_hat_2": summary.K_hat_2,
        "map_by_K": [
            {"K": m.K, "change_points": list(m.change_points), "log_value": m.log_value, "log_joint": j}
            for m, j in zip(summary.map_by_K, summary.map_log_joint_by_K)
        ],
        "global_map": {"K": summary.global_map.K, "change_points": list(summary.global_map.change_points)},
        "edge_time": edge_info,
        "warnings": warnings,
        "config": _config_echo(cfg, "detect"),
    }
    write_json(out / "summary.json", result)
    write_json(out / "config.json", dataclasses.asdict(cfg))
    write_json(out / "timing.json", {"wall_time_seconds": time.perf_counter() - t0})
    for w in warnings:
        log.warning(w)
    return result


def cmd_simulate(cfg: RunConfig) -> dict:
    sc = Scenario(
        structure=cfg.structure,
        N=cfg.n,
        p=cfg.p,
        segment_fractions=tuple(cfg.fractions),
        p_C=cfg.p_c,
        seed=cfg.seed,
        shared_structure=cfg.shared_structure or cfg.replicates > 1,
    )
    if cfg.replicates < 1:
        raise ConfigurationError("replicates must be >= 1")
    out = _output_dir(cfg)
    files = []
    for u in range(cfg.replicates):
        data, truth = generate_dataset(sc, index=None if cfg.replicates == 1 else u)
        name = "data.csv" if cfg.replicates == 1 else f"data_{u + 1:03d}.csv"
        write_matrix_csv(out / name, data.values, header=data.variable_names)
        files.append(name)
    doc = {
        "treecpd_version": __version__,
        "N": sc.N,
        "p": sc.p,
        "structure": sc.structure,
        "p_C": sc.p_C,
        "segment_fractions": list(sc.segment_fractions),
        "change_points": truth.change_points,
        "K": len(truth.change_points) + 1,
        "adjacency_by_segment": truth.adjacency_by_segment,
        "precision_by_segment": truth.precision_by_segment,
        "files": files,
        "config": _config_echo(cfg, "simulate"),
    }
    write_json(out / "truth.json", doc)
    return doc


def _parse_change_points(cps) -> list[int]:
    if cps is None:
        raise ConfigurationError("compare needs --change-points (use '' for a single segment)")
    if isinstance(cps, str):
        cps = [c for c in cps.replace(" ", "").split(",") if c]
    try:
        vals = [int(c) for c in cps]
    except (TypeError, ValueError):
        raise ConfigurationError(f"change points must be integers, got {cps!r}") from None
    if vals != sorted(set(vals)):
        raise ConfigurationError(f"change points must be strictly increasing, got {vals}")
    return vals


def cmd_compare(cfg: RunConfig) -> dict:
    prep = prepare_model(cfg)
    model = prep.model
    cps = _parse_change_points(cfg.change_points)
    status = edge_status_comparison(model, cps, tuple(cfg.lam))
    struct = structure_comparison(model, cps, cfg.pi)
    out = _output_dir(cfg)
    p = model.p
    rows = []
    for i, j in zip(*np.triu_indices(p, k=1)):
        rows.append((i + 1, j + 1, *status.posterior[i, j], *status.q0[i, j], *status.q[i, j]))
    cols = ["i", "j", "p_absent", "p_changes", "p_present"]
    cols += [f"prior_{e}" for e in ("absent", "changes", "present")]
    cols += [f"post_{e}" for e in ("absent", "changes", "present")]
    write_table(out / "edge_status.csv", cols, rows, int_cols=2)
    warnings = list(prep.notes)
    if status.trivial or struct.trivial:
        warnings.append("comparison is trivial for this segmentation (single segment or p = 2)")
    result = {
        "treecpd_version": __version__,
        "data": _data_info(prep),
        "change_points": cps,
        "structure": dataclasses.asdict(struct),
        "lambda": list(status.lam),
        "warnings": warnings,
        "config": _config_echo(cfg, "compare"),
    }
    write_json(out / "summary.json", result)
    write_json(out / "config.json", dataclasses.asdict(cfg))
    for w in warnings:
        log.warning(w)
    return result


def local_maxima(B: np.ndarray, threshold: float) -> list[int]:
    """1-based times where ``B`` is a (weak) local maximum of height ``>= threshold``."""
    B = np.asarray(B, dtype=float)
    out = []
    for k in range(len(B)):
        left = B[k - 1] if k > 0 else -np.inf
        right = B[k + 1] if k + 1 < len(B) else -np.inf
        if B[k] >= threshold and B[k] >= left and B[k] >= right and B[k] > 0:
            out.append(k + 1)
    return out


def cmd_evaluate(cfg: RunConfig) -> dict:
    if not cfg.result_dir or not cfg.truth:
        raise ConfigurationError("evaluate needs --result and --truth")
    res_dir = Path(cfg.result_dir)
    summary = read_json(res_dir / "summary.json")
    truth = read_json(cfg.truth)
    N, p = summary["data"]["N"], summary["data"]["p"]
    if (N, p) != (truth["N"], truth["p"]):
        raise IngestionError(f"result has N={N}, p={p} but truth has N={truth['N']}, p={truth['p']}")
    header, cp = read_long(res_dir / "changepoints.csv")
    B = cp[:, header.index("B")]
    if len(B) != N:
        raise IngestionError(f"changepoints.csv has {len(B)} rows, expected {N}")
    peaks = local_maxima(B, cfg.peak_threshold)
    loc = []
    for c in truth["change_points"]:
        dist = min((abs(pk - c) for pk in peaks), default=None)
        loc.append({"change_point": c, "nearest_peak_distance": dist})
    K_true = truth["K"]
    metrics = {
        "treecpd_version": __version__,
        "K_true": K_true,
        "K_hat_1": summary["K_hat_1"],
        "K_hat_2": summary["K_hat_2"],
        "K_hat_1_correct": summary["K_hat_1"] == K_true,
        "K_hat_2_correct": summary["K_hat_2"] == K_true,
        "peak_threshold": cfg.peak_threshold,
        "peaks": peaks,
        "localization": loc,
        "auc": None,
        "config": _config_echo(cfg, "evaluate"),
    }
    edge_file = res_dir / "edge_time.csv"
    out = _output_dir(cfg)
    if edge_file.exists():
        _, body = read_long(edge_file)
        if len(body) != N * p * (p - 1) // 2:
            raise IngestionError(f"{edge_file}: {len(body)} rows, expected {N * p * (p - 1) // 2}")
        probs = np.zeros((N, p, p))
        t, i, j = (body[:, k].astype(int) - 1 for k in range(3))
        probs[t, i, j] = probs[t, j, i] = body[:, 3]
        bounds = [1] + list(truth["change_points"]) + [N + 1]
        adj = np.asarray(truth["adjacency_by_segment"])
        aucs = np.full(N, np.nan)
        for r, (a, b) in enumerate(zip(bounds, bounds[1:])):
            present = adj[r][np.triu_indices(p, k=1)]
            if p >= 3 and 0 < present.sum() < present.size:
                for u in range(a, b):
                    aucs[u - 1] = auc_roc(probs[u - 1], adj[r])
        mids = [(a + b) // 2 for a, b in zip(bounds, bounds[1:])]
        metrics["auc"] = {
            "K": summary["edge_time"]["K"] if summary.get("edge_time") else None,
            "mean": float(np.nanmean(aucs)) if np.isfinite(aucs).any() else None,
            "at_segment_midpoints": [aucs[m - 1] for m in mids],
        }
        write_table(out / "auc_by_time.csv", ["t", "auc"], [(u + 1, aucs[u]) for u in range(N)], int_cols=1)
    write_json(out / "metrics.json", metrics)
    return metrics


def _add_model_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("model")
    g.add_argument("--prior", choices=["naive", "data-driven"])
    g.add_argument("--alpha", type=float, help="inverse-Wishart degrees of freedom (default p + 10)")
    g.add_argument("--mean-mode", dest="mean_mode", choices=["zero", "unknown"])
    g.add_argument("--kappa0", type=float)
    g.add_argument("--backend", choices=["tree", "full"])
    g.add_argument("--temper-alpha", dest="temper_alpha", type=float, help="default 1, or U with U replicates")
    g.add_argument("--standardize", action="store_true", default=None)
    g.add_argument("--l-min", dest="l_min", type=int)
    g.add_argument("--segment-weights", dest="segment_weights", help="CSV of (N+1)x(N+1) segment log-weights")
    g.add_argument("--edge-prior", dest="edge_prior", help="CSV of p x p positive edge weights")
    g.add_argument("--threads", type=int)


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON configuration file")
    sp.add_argument("--out", dest="output_dir", help=f"output directory (env {OUTPUT_ENV})")


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treecpd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"treecpd {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="posterior change-points, number of segments and edges over time")
    d.add_argument("data", nargs="*", help="CSV file(s) or a directory; several files = replicate mode")
    _add_common(d)
    _add_model_flags(d)
    d.add_argument("--k-max", dest="k_max", type=int)
    d.add_argument("--k-prior", dest="k_prior", choices=["poisson", "uniform"])
    d.add_argument("--gamma", type=float, help="Poisson rate of the prior on K")
    d.add_argument("--edge-time-k", dest="edge_time_k", help="khat1 (default), khat2, none, or an integer K")
    d.add_argument("--s-k-floor", dest="s_k_floor", type=float)

    s = sub.add_parser("simulate", help="synthetic piecewise tree or Erdos-Renyi data")
    _add_common(s)
    s.add_argument("--structure", choices=["tree", "erdos-renyi"])
    s.add_argument("--n", type=int)
    s.add_argument("--p", type=int)
    s.add_argument("--fractions", type=_csv_floats)
    s.add_argument("--p-c", dest="p_c", type=float)
    s.add_argument("--replicates", type=int)
    s.add_argument("--shared-structure", dest="shared_structure", action="store_true", default=None)
    s.add_argument("--seed", type=int)

    c = sub.add_parser("compare", help="edge status and structure comparison for a fixed segmentation")
    c.add_argument("data", nargs="*")
    _add_common(c)
    _add_model_flags(c)
    c.add_argument("--change-points", dest="change_points", help="comma-separated, e.g. 31,41,61")
    c.add_argument("--lambda", dest="lam", type=_csv_floats, help="prior of (absent, changes, present)")
    c.add_argument("--pi", type=float, help="prior probability that all segments share one tree")

    e = sub.add_parser("evaluate", help="score a detect result against simulation truth")
    _add_common(e)
    e.add_argument("--result", dest="result_dir")
    e.add_argument("--truth")
    e.add_argument("--peak-threshold", dest="peak_threshold", type=float)
    return parser


COMMANDS = {"detect": cmd_detect, "simulate": cmd_simulate, "compare": cmd_compare, "evaluate": cmd_evaluate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="treecpd: %(levelname)s: %(message)s"
    )
    try:
        cfg = resolve_config(args)
        result = COMMANDS[args.command](cfg)
    except TreeCPDError as exc:
        print(f"treecpd: error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.command == "detect":
        print(json.dumps({"K_hat_1": result["K_hat_1"], "K_hat_2": result["K_hat_2"],
                          "global_map": result["global_map"], "output_dir": cfg.output_dir}))
    else:
        print(json.dumps({"output_dir": cfg.output_dir}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
