"""End-to-end tests for the command-line interface.

Commands are exercised through :func:`structbias.cli.main` with real files in
temporary directories; stderr error records and exit codes come from the
shared error taxonomy.
"""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from structbias.cli import main
from structbias.datasets import load_dataset
from structbias.nn.model_io import load_model
from structbias.positions import PositionMatrix, save_positions
from structbias.reports import validate_report


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def stderr_record(err: str) -> dict:
    return json.loads(err.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A generated dataset plus a small trained model shared by the tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["generate", "--out", str(data), "--sample-size", "30",
                 "--per-bias-class", "40", "--seed", "3"]) == 0
    assert main(["train", "--data", str(data), "--out",
                 str(root / "model_30.sbnn"), "--epochs", "2", "--seed", "1"]) == 0
    return root


@pytest.fixture(scope="module")
def uniform_positions(workspace):
    path = workspace / "uniform_positions.csv"
    data = np.random.default_rng(11).random((30, 3))
    save_positions(PositionMatrix(data=data, provenance={"source": "test"}), path)
    return path


@pytest.fixture(scope="module")
def biased_positions(workspace):
    path = workspace / "biased_positions.csv"
    data = np.clip(np.random.default_rng(12).normal(0.5, 0.04, (30, 3)), 0.0, 1.0)
    save_positions(PositionMatrix(data=data), path)
    return path


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

class TestGenerate:
    def test_writes_all_artifacts(self, workspace):
        data = workspace / "data"
        for name in ("train.csv", "validation.csv", "portfolio.json", "manifest.json"):
            assert (data / name).exists()

    def test_manifest_counts_match_dataset(self, workspace):
        data = workspace / "data"
        manifest = json.loads((data / "manifest.json").read_text())
        assert manifest["manifest_version"] == 1
        train_set = load_dataset(data / "train.csv")
        assert manifest["train_counts"] == {
            label.value: count for label, count in sorted(train_set.class_counts().items())
        }
        assert manifest["dataset_spec"]["master_seed"] == 3
        assert manifest["dataset_spec"]["sample_size"] == 30

    def test_rerun_same_seed_is_byte_identical(self, workspace, tmp_path, capsys):
        code, out, _ = run_cli(
            ["generate", "--out", str(tmp_path / "again"), "--sample-size", "30",
             "--per-bias-class", "40", "--seed", "3"], capsys)
        assert code == 0 and "train" in out
        original = (workspace / "data" / "train.csv").read_bytes()
        assert (tmp_path / "again" / "train.csv").read_bytes() == original

    def test_scenario_filter_limits_classes(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["generate", "--out", str(tmp_path / "filtered"), "--sample-size", "30",
             "--scenarios", "uniform,center_gaussian", "--per-bias-class", "12",
             "--seed", "0"], capsys)
        assert code == 0
        train_set = load_dataset(tmp_path / "filtered" / "train.csv")
        labels = {label.value for label, count in train_set.class_counts().items()
                  if count > 0}
        assert labels == {"Uniform", "Center"}

    def test_unknown_scenario_id_fails(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["generate", "--out", str(tmp_path / "x"), "--scenarios", "nope"],
            capsys)
        assert code == 2
        record = stderr_record(err)
        assert record["error"] == "validation"
        assert "nope" in record["message"]


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

class TestTrain:
    def test_model_and_history_written(self, workspace):
        model_path = workspace / "model_30.sbnn"
        network = load_model(model_path)
        assert network.config.sample_size == 30
        history = (workspace / "model_30.history.csv").read_text().splitlines()
        assert history[0].startswith("epoch,")
        assert len(history) == 1 + 2  # header + one row per epoch

    def test_missing_dataset_fails(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["train", "--data", str(tmp_path / "void"), "--out",
             str(tmp_path / "m.sbnn")], capsys)
        assert code == 7
        assert stderr_record(err)["error"] == "missing-resource"


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------

class TestDetect:
    def test_stat_only_to_stdout(self, uniform_positions, capsys):
        code, out, _ = run_cli(
            ["detect", "--positions", str(uniform_positions), "--method", "stat"],
            capsys)
        assert code == 0
        report = json.loads(out)
        validate_report(report)
        assert report["method"] == "stat"
        assert report["deep"] is None
        assert report["positions"]["provenance"] == {"source": "test"}

    def test_both_methods_to_file(self, workspace, biased_positions, tmp_path, capsys):
        out_path = tmp_path / "report.json"
        code, _, _ = run_cli(
            ["detect", "--positions", str(biased_positions), "--model",
             str(workspace / "model_30.sbnn"), "--method", "both",
             "--out", str(out_path)], capsys)
        assert code == 0
        report = json.loads(out_path.read_text())
        validate_report(report)
        assert report["agreement"] is not None
        assert report["statistical"]["biased"] is True  # tight Gaussian around 0.5
        assert report["model"]["sample_size"] == 30

    def test_deep_without_model_fails(self, uniform_positions, capsys):
        code, _, err = run_cli(
            ["detect", "--positions", str(uniform_positions), "--method", "deep"],
            capsys)
        assert code == 2
        assert "--model" in stderr_record(err)["message"]

    def test_missing_positions_fails(self, capsys):
        code, _, err = run_cli(
            ["detect", "--positions", "does-not-exist.csv", "--method", "stat"],
            capsys)
        assert code == 7
        assert stderr_record(err)["error"] == "missing-resource"


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------

class TestExplain:
    def test_one_plot_and_table_per_dimension(self, workspace, uniform_positions,
                                              tmp_path, capsys):
        out = tmp_path / "expl"
        code, _, _ = run_cli(
            ["explain", "--positions", str(uniform_positions), "--model",
             str(workspace / "model_30.sbnn"), "--out", str(out),
             "--dimensions", "0,2", "--background-count", "12",
             "--n-coalitions", "128", "--seed", "5"], capsys)
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "attribution_dim0.csv", "attribution_dim0.svg",
            "attribution_dim2.csv", "attribution_dim2.svg",
        ]
        root = ET.fromstring((out / "attribution_dim0.svg").read_text())
        points = [e for e in root.iter() if e.get("class") == "pt"]
        assert len(points) == 30
        table = (out / "attribution_dim0.csv").read_text().splitlines()
        assert table[0] == "index,value,phi"
        assert len(table) == 1 + 30

    def test_invalid_target_class_lists_valid_names(self, workspace,
                                                    uniform_positions, tmp_path,
                                                    capsys):
        code, _, err = run_cli(
            ["explain", "--positions", str(uniform_positions), "--model",
             str(workspace / "model_30.sbnn"), "--out", str(tmp_path / "e"),
             "--target-class", "Weird"], capsys)
        assert code == 2
        message = stderr_record(err)["message"]
        for name in ("Uniform", "Center", "Bounds", "GapsClusters", "Discretisation"):
            assert name in message

    def test_dimension_out_of_range_fails(self, workspace, uniform_positions,
                                          tmp_path, capsys):
        code, _, err = run_cli(
            ["explain", "--positions", str(uniform_positions), "--model",
             str(workspace / "model_30.sbnn"), "--out", str(tmp_path / "e"),
             "--dimensions", "9"], capsys)
        assert code == 2
        assert "out of range" in stderr_record(err)["message"]

    def test_sample_size_mismatch_fails(self, workspace, tmp_path, capsys):
        wrong = tmp_path / "wrong.csv"
        save_positions(PositionMatrix(np.random.default_rng(0).random((40, 2))), wrong)
        code, _, err = run_cli(
            ["explain", "--positions", str(wrong), "--model",
             str(workspace / "model_30.sbnn"), "--out", str(tmp_path / "e")],
            capsys)
        assert code == 2
        assert "40 runs" in stderr_record(err)["message"]


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

class TestCompare:
    def test_small_comparison(self, workspace, tmp_path, capsys):
        out = tmp_path / "cmp"
        code, stdout, _ = run_cli(
            ["compare", "--out", str(out), "--models", str(workspace),
             "--dimensions", "1,2", "--sample-sizes", "30", "--count", "3",
             "--seed", "9"], capsys)
        assert code == 0 and "4 cells" in stdout
        summary = json.loads((out / "summary.json").read_text())
        validate_report(summary)
        assert summary["kind"] == "compare"
        assert summary["subjects_per_condition"] == {"biased": 3, "unbiased": 3}
        assert len(summary["cells"]) == 4  # 2 methods x 2 dims x 1 size
        for cell in summary["cells"]:
            assert cell["tp"] + cell["fn"] == 3
            assert cell["fp"] + cell["tn"] == 3
        ET.fromstring((out / "summary.svg").read_text())

    def test_missing_model_for_size_fails(self, workspace, tmp_path, capsys):
        code, _, err = run_cli(
            ["compare", "--out", str(tmp_path / "c"), "--models", str(workspace),
             "--dimensions", "1", "--sample-sizes", "99", "--count", "2"],
            capsys)
        assert code == 7
        assert "model_99.sbnn" in stderr_record(err)["message"]

    def test_bad_dimension_list_fails(self, workspace, tmp_path, capsys):
        code, _, err = run_cli(
            ["compare", "--out", str(tmp_path / "c"), "--models", str(workspace),
             "--dimensions", "one", "--sample-sizes", "30"], capsys)
        assert code == 2
        assert "--dimensions" in stderr_record(err)["message"]


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

class TestBenchmark:
    def test_selection_runs_and_reports(self, workspace, tmp_path, capsys):
        out = tmp_path / "bench"
        code, stdout, _ = run_cli(
            ["benchmark", "--out", str(out), "--model",
             str(workspace / "model_30.sbnn"), "--n", "2", "--runs", "30",
             "--max-evaluations", "120",
             "--selection", "random_search,de_best_1_bin_p20_saturate",
             "--seed", "4"], capsys)
        assert code == 0
        assert "random_search: agreement=" in stdout
        report = json.loads((out / "benchmark.json").read_text())
        validate_report(report)
        assert [r["subject"] for r in report["records"]] == [
            "random_search", "de_best_1_bin_p20_saturate",
        ]
        for record in report["records"]:
            assert (out / record["positions_file"]).exists()
        ET.fromstring((out / "benchmark.svg").read_text())

    def test_unknown_selection_fails(self, workspace, tmp_path, capsys):
        code, _, err = run_cli(
            ["benchmark", "--out", str(tmp_path / "b"), "--model",
             str(workspace / "model_30.sbnn"), "--selection", "gradient_descent"],
            capsys)
        assert code == 2
        assert "gradient_descent" in stderr_record(err)["message"]

    def test_runs_model_mismatch_fails(self, workspace, tmp_path, capsys):
        code, _, err = run_cli(
            ["benchmark", "--out", str(tmp_path / "b"), "--model",
             str(workspace / "model_30.sbnn"), "--runs", "40",
             "--selection", "random_search"], capsys)
        assert code == 2
        assert "--runs" in stderr_record(err)["message"]


# ---------------------------------------------------------------------------
# parser-level behaviour
# ---------------------------------------------------------------------------

class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.startswith("structbias ")

    def test_command_required(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2
