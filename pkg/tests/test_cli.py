import json

import numpy as np
import pytest

from treecpd.cli import local_maxima, main
from treecpd.dataio import read_csv, read_long, write_json, write_long
from treecpd.edges import edge_status_comparison
from treecpd.errors import NumericalError
from treecpd.likelihood import SegmentModel
from treecpd.marginals import PriorSpec


def run(argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


def write_csv(path, rows, header=None):
    lines = [",".join(header)] if header else []
    lines += [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def toy(tmp_path):
    rng = np.random.default_rng(0)
    return write_csv(tmp_path / "toy.csv", rng.normal(size=(3, 3)).round(6).tolist(), ["a", "b", "c"])


def test_detect_three_point_toy(tmp_path, toy, monkeypatch):
    captured = {}
    build = SegmentModel.build_A

    def spy(self, threads=1):
        captured["A"] = build(self, threads)
        return captured["A"]

    monkeypatch.setattr(SegmentModel, "build_A", spy)
    out = tmp_path / "out"
    assert run(["detect", toy, "--out", out, "--k-max", 3]) == 0
    assert np.isfinite(captured["A"].log_A).sum() == 6
    summary = load(out / "summary.json")
    for key in ("log_evidence_by_K", "posterior_K", "K_hat_1", "K_hat_2", "map_by_K", "global_map", "config", "treecpd_version"):
        assert key in summary
    assert sum(summary["posterior_K"]) == pytest.approx(1.0, abs=1e-12)
    assert summary["data"]["variable_names"] == ["a", "b", "c"]
    for name in ("posterior_K.csv", "changepoints.csv", "changepoints_by_k.csv", "segments.csv", "edge_time.csv", "segment_edges.csv", "timing.json"):
        assert (out / name).exists()


def test_detect_single_segment_report(tmp_path, toy):
    out = tmp_path / "out"
    assert run(["detect", toy, "--out", out, "--k-max", 1]) == 0
    summary = load(out / "summary.json")
    assert summary["posterior_K"] == [1.0]
    assert summary["global_map"]["change_points"] == []
    header, body = read_long(out / "changepoints.csv")
    assert header == ["t", "B"] and np.all(body[:, 1] == 0)
    _, bykk = read_long(out / "changepoints_by_k.csv")
    assert bykk.size == 0


def test_simulate_layout_and_two_columns(tmp_path):
    out = tmp_path / "sim"
    assert run(["simulate", "--n", 70, "--p", 4, "--seed", 3, "--out", out]) == 0
    truth = load(out / "truth.json")
    assert truth["change_points"] == [31, 41, 61]
    assert read_csv(out / "data.csv").values.shape == (70, 4)
    assert run(["simulate", "--n", 20, "--p", 2, "--fractions", "0.5,0.5", "--out", tmp_path / "p2"]) == 0
    lines = (tmp_path / "p2" / "data.csv").read_text().splitlines()
    assert lines[0] == "V1,V2" and all(len(line.split(",")) == 2 for line in lines)


def test_simulate_same_seed_same_bytes(tmp_path):
    for name in ("a", "b"):
        assert run(["simulate", "--n", 50, "--p", 5, "--seed", 11, "--replicates", 2, "--out", tmp_path / name]) == 0
    for f in ("data_001.csv", "data_002.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    a, b = load(tmp_path / "a" / "truth.json"), load(tmp_path / "b" / "truth.json")
    assert a["config"].pop("output_dir") != b["config"].pop("output_dir")
    assert a == b
    assert run(["simulate", "--fractions", "0.5,0.6", "--out", tmp_path / "bad"]) == 2


def test_round_trip_and_config_echo(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--n", 60, "--p", 4, "--seed", 5, "--out", sim]) == 0
    first = tmp_path / "first"
    assert run(["detect", sim / "data.csv", "--out", first, "--k-max", 6, "--l-min", 2, "--mean-mode", "unknown"]) == 0
    second = tmp_path / "second"
    assert run(["detect", "--config", first / "config.json", "--out", second]) == 0
    for f in first.iterdir():
        if f.name not in ("timing.json", "summary.json", "config.json"):
            assert f.read_bytes() == (second / f.name).read_bytes(), f.name
    a, b = load(first / "summary.json"), load(second / "summary.json")
    a["config"].pop("output_dir")
    b["config"].pop("output_dir")
    assert a == b


def test_replicate_directory_and_tempering_note(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--n", 30, "--p", 3, "--replicates", 3, "--seed", 2, "--out", sim]) == 0
    out = tmp_path / "out"
    assert run(["detect", sim, "--out", out, "--k-max", 4]) == 0
    summary = load(out / "summary.json")
    assert summary["data"]["replicates"] == 3
    assert any("temper_alpha = U = 3" in w for w in summary["warnings"])


def test_ingestion_errors_exit_three(tmp_path, capsys):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2,3\n4,5\n6,7,8\n")
    assert run(["detect", ragged, "--out", tmp_path / "o"]) == 3
    assert "line 2" in capsys.readouterr().err
    nan = write_csv(tmp_path / "nan.csv", [[1, 2], [3, "nan"], [5, 6]])
    assert run(["detect", nan, "--out", tmp_path / "o"]) == 3
    assert "line 2, column 2" in capsys.readouterr().err
    a = write_csv(tmp_path / "a.csv", [[1, 2], [3, 4], [5, 7]])
    b = write_csv(tmp_path / "b.csv", [[1, 2], [3, 4]])
    assert run(["detect", a, b, "--out", tmp_path / "o"]) == 3
    assert run(["detect", tmp_path / "missing.csv", "--out", tmp_path / "o"]) == 3
    bad_prior = write_csv(tmp_path / "b_prior.csv", [[1, 2], [2, "x"]])
    assert run(["detect", a, "--edge-prior", bad_prior, "--out", tmp_path / "o"]) == 3
    small = write_csv(tmp_path / "small.csv", [[1.0]])
    assert run(["detect", a, "--edge-prior", small, "--out", tmp_path / "o"]) == 2


def test_configuration_errors_exit_two(tmp_path, toy):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k_maximum": 3}))
    assert run(["detect", toy, "--config", cfg, "--out", tmp_path / "o"]) == 2
    assert run(["detect", toy, "--k-max", 0, "--out", tmp_path / "o"]) == 2
    assert run(["detect", toy, "--alpha", 1.0, "--out", tmp_path / "o"]) == 2
    assert run(["detect", toy, "--temper-alpha", 0.5, "--out", tmp_path / "o"]) == 2


def test_numerical_failure_exit_four(tmp_path, toy, monkeypatch):
    def fail(self, threads=1):
        raise NumericalError("non-finite segment likelihood")

    monkeypatch.setattr(SegmentModel, "build_A", fail)
    assert run(["detect", toy, "--out", tmp_path / "o"]) == 4


def test_compare_matches_library_and_rejections(tmp_path):
    rng = np.random.default_rng(3)
    y = np.vstack([rng.normal(size=(6, 3)), rng.normal(size=(6, 3)) @ np.array([[1, 0.9, 0], [0, 0.4, 0], [0, 0, 1.0]])])
    data = write_csv(tmp_path / "y.csv", y.tolist())
    out = tmp_path / "cmp"
    assert run(["compare", data, "--change-points", "7", "--lambda", "0.2,0.5,0.3", "--pi", 0.4, "--out", out]) == 0
    header, body = read_long(out / "edge_status.csv")
    want = edge_status_comparison(SegmentModel(read_csv(data).values, PriorSpec.default(3)), [7], (0.2, 0.5, 0.3))
    for row in body:
        i, j = int(row[0]) - 1, int(row[1]) - 1
        np.testing.assert_allclose(row[2:5], want.posterior[i, j], rtol=1e-12)
        assert row[2:5].sum() == pytest.approx(1.0, abs=1e-12)
    assert 0 <= load(out / "summary.json")["structure"]["pi_star"] <= 1
    single = tmp_path / "single"
    assert run(["compare", data, "--change-points", "", "--out", single]) == 0
    assert any("trivial" in w for w in load(single / "summary.json")["warnings"])
    assert run(["compare", data, "--change-points", "7", "--lambda", "0.3,0.3,0.3", "--out", tmp_path / "x"]) == 2
    assert run(["compare", data, "--change-points", "8,4", "--out", tmp_path / "x"]) == 2
    assert run(["compare", data, "--change-points", "4,a", "--out", tmp_path / "x"]) == 2


def truth_as_result(truth_path, result_dir, B):
    """A result directory whose edge tensor is the true adjacency itself."""
    truth = load(truth_path)
    N, p = truth["N"], truth["p"]
    bounds = [1] + truth["change_points"] + [N + 1]
    adj = np.asarray(truth["adjacency_by_segment"], dtype=float)
    iu, ju = np.triu_indices(p, k=1)
    keys, vals = [], []
    for r, (a, b) in enumerate(zip(bounds, bounds[1:])):
        for t in range(a, b):
            keys.append(np.column_stack([np.full(len(iu), t), iu + 1, ju + 1]))
            vals.append(adj[r][iu, ju])
    result_dir.mkdir()
    write_long(result_dir / "edge_time.csv", ["t", "i", "j", "prob"], np.vstack(keys), np.concatenate(vals))
    write_long(result_dir / "changepoints.csv", ["t", "B"], np.arange(1, N + 1), B)
    write_json(
        result_dir / "summary.json",
        {"data": {"N": N, "p": p}, "K_hat_1": truth["K"], "K_hat_2": truth["K"], "edge_time": {"K": truth["K"]}},
    )


def test_evaluate_truth_against_itself(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--n", 40, "--p", 5, "--seed", 8, "--out", sim]) == 0
    truth = load(sim / "truth.json")
    B = np.zeros(40)
    B[np.array(truth["change_points"]) - 1] = 1.0
    res = tmp_path / "res"
    truth_as_result(sim / "truth.json", res, B)
    out = tmp_path / "ev"
    assert run(["evaluate", "--result", res, "--truth", sim / "truth.json", "--out", out]) == 0
    metrics = load(out / "metrics.json")
    assert metrics["K_hat_1_correct"] and metrics["K_hat_2_correct"]
    assert all(d["nearest_peak_distance"] == 0 for d in metrics["localization"])
    assert metrics["auc"]["mean"] == 1.0
    _, auc = read_long(out / "auc_by_time.csv")
    assert np.all(auc[:, 1] == 1.0) and len(auc) == 40


def test_evaluate_without_peaks_and_shape_mismatch(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--n", 40, "--p", 5, "--seed", 9, "--out", sim]) == 0
    res = tmp_path / "res"
    truth_as_result(sim / "truth.json", res, np.zeros(40))
    out = tmp_path / "ev"
    assert run(["evaluate", "--result", res, "--truth", sim / "truth.json", "--out", out]) == 0
    metrics = load(out / "metrics.json")
    assert metrics["peaks"] == []
    assert all(d["nearest_peak_distance"] is None for d in metrics["localization"])
    other = tmp_path / "other"
    assert run(["simulate", "--n", 41, "--p", 5, "--out", other]) == 0
    assert run(["evaluate", "--result", res, "--truth", other / "truth.json", "--out", out]) == 3


def test_evaluate_scores_a_detect_run(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--n", 70, "--p", 5, "--seed", 1, "--out", sim]) == 0
    det = tmp_path / "det"
    assert run(["detect", sim / "data.csv", "--out", det, "--edge-time-k", "4"]) == 0
    out = tmp_path / "ev"
    assert run(["evaluate", "--result", det, "--truth", sim / "truth.json", "--out", out]) == 0
    metrics = load(out / "metrics.json")
    assert metrics["auc"]["K"] == 4
    assert 0 <= metrics["auc"]["mean"] <= 1
    assert len(metrics["localization"]) == 3


def test_output_dir_from_environment(tmp_path, toy, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv("TREECPD_OUTPUT_DIR", str(target))
    assert run(["detect", toy, "--k-max", 2]) == 0
    assert (target / "summary.json").exists()
    flag = tmp_path / "from-flag"
    assert run(["detect", toy, "--k-max", 2, "--out", flag]) == 0
    assert (flag / "summary.json").exists()


def test_threads_give_identical_outputs(tmp_path, monkeypatch):
    monkeypatch.setattr("treecpd.likelihood.CHUNK", 50)
    sim = tmp_path / "sim"
    assert run(["simulate", "--n", 40, "--p", 4, "--seed", 4, "--out", sim]) == 0
    for t in (1, 3):
        assert run(["detect", sim / "data.csv", "--threads", t, "--out", tmp_path / f"t{t}"]) == 0
    for name in ("changepoints.csv", "segments.csv", "edge_time.csv"):
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t3" / name).read_bytes()


def test_local_maxima():
    assert local_maxima(np.array([0.0, 0.2, 0.1, 0.1, 0.3]), 0.05) == [2, 5]
    assert local_maxima(np.array([0.0, 0.04, 0.0]), 0.05) == []
    assert local_maxima(np.zeros(4), 0.0) == []
    assert local_maxima(np.array([1.0]), 0.5) == [1]
