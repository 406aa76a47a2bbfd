"""End-to-end command-line checks driven through click's test runner.

Long-running subcommands (tune, benchmark, validate) are exercised with a
deliberately tight search space and small hyperparameters; the point here
is wiring, artifacts and exit codes, not model quality.
"""

from __future__ import annotations

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from glassboost import cli
from glassboost.dataio import load_split_manifest
from glassboost.ebm import EbmHyperparams
from glassboost.hpo import INTEGER, LOG_UNIFORM, UNIFORM, ParamSpec, SearchSpace
from glassboost.pretrain import load_pipeline
from glassboost.serialize import canonical_json, strip_timing


def _write_dataset(path, n_rows=240, seed=5):
    """CSV with numeric, missing, categorical and sensitive columns."""
    rng = np.random.default_rng(seed)
    age = rng.uniform(20.0, 70.0, n_rows)
    wage = rng.normal(30.0, 8.0, n_rows)
    missing = rng.uniform(size=n_rows) < 0.06
    job = rng.integers(0, 3, n_rows)
    sex = rng.integers(0, 2, n_rows)
    logits = (
        0.08 * (age - 45.0)
        + np.where(missing, 0.0, 0.06 * (wage - 30.0))
        + np.where(job == 2, 1.2, 0.0)
        + np.where(sex == 0, 0.7, 0.0)
    )
    y = (rng.uniform(size=n_rows) < 1.0 / (1.0 + np.exp(-logits))).astype(int)
    job_names = ["clerk", "nurse", "pilot"]
    sex_names = ["a", "b"]
    lines = ["age,wage,job,sex,label"]
    for i in range(n_rows):
        wage_cell = "" if missing[i] else f"{wage[i]:.3f}"
        lines.append(
            f"{age[i]:.3f},{wage_cell},{job_names[job[i]]},{sex_names[sex[i]]},{y[i]}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


def _tiny_space(objective="performance"):
    params = [
        ParamSpec("learning_rate", LOG_UNIFORM, 0.05, 0.5),
        ParamSpec("max_rounds", INTEGER, 5, 15),
        ParamSpec("max_leaves", INTEGER, 2, 3),
        ParamSpec("interactions", INTEGER, 0, 1),
        ParamSpec("outer_bags", INTEGER, 2, 3),
        ParamSpec("greedy_ratio", UNIFORM, 0.0, 1.0),
    ]
    if objective == "fairness":
        params.append(ParamSpec("lambda", UNIFORM, 0.0, 2.0))
    elif objective != "performance":
        raise ValueError(f"unknown objective {objective!r}")
    return SearchSpace(params)


def _fast_hp(random_state=1337):
    return EbmHyperparams(
        random_state=random_state,
        max_rounds=25,
        outer_bags=2,
        interactions=0,
        early_stopping_patience=8,
    )


FAST_TRAIN = [
    "--max-rounds", "15", "--outer-bags", "2",
    "--interactions", "0", "--patience", "5",
]


@pytest.fixture(scope="module")
def dataset_csv(tmp_path_factory):
    return _write_dataset(tmp_path_factory.mktemp("data") / "toy.csv")


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, out_dir, args, seed=11):
    result = runner.invoke(
        cli.main, ["--seed", str(seed), "--out-dir", str(out_dir), *args]
    )
    return result


def _ok(result):
    assert result.exit_code == 0, result.output
    return result


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class TestIngest:
    def test_writes_canonical_csv_and_schema(self, runner, dataset_csv, tmp_path):
        _ok(_invoke(runner, tmp_path, [
            "ingest", "--input", dataset_csv, "--target", "label",
        ]))
        out_csv = tmp_path / "ingested.csv"
        assert out_csv.exists()
        schema = _read(str(out_csv) + ".schema.json")
        assert schema["n_rows"] == 240
        kinds = {c["name"]: c["kind"] for c in schema["columns"]}
        assert kinds == {
            "age": "numeric", "wage": "numeric",
            "job": "categorical", "sex": "categorical",
        }
        assert 0.0 < schema["positive_rate"] < 1.0
        missing = {c["name"]: c["missing"] for c in schema["columns"]}
        assert missing["wage"] > 0
        header = out_csv.read_text(encoding="utf-8").splitlines()[0]
        assert header == "age,wage,job,sex,label"

    def test_explicit_output_path(self, runner, dataset_csv, tmp_path):
        target = tmp_path / "nested" / "clean.csv"
        _ok(_invoke(runner, tmp_path, [
            "ingest", "--input", dataset_csv, "--target", "label",
            "--output", str(target),
        ]))
        assert target.exists()


class TestSplit:
    def test_manifest_round_trip(self, runner, dataset_csv, tmp_path):
        _ok(_invoke(runner, tmp_path, [
            "split", "--input", dataset_csv, "--target", "label",
            "--repeats", "2", "--test-fraction", "0.25",
        ]))
        splits = load_split_manifest(tmp_path / "splits.json")
        assert len(splits) == 2
        for train, test in splits:
            assert len(train) + len(test) == 240
            assert len(np.intersect1d(train, test)) == 0

    def test_same_seed_same_manifest(self, runner, dataset_csv, tmp_path):
        for name in ("one", "two"):
            _ok(_invoke(runner, tmp_path / name, [
                "split", "--input", dataset_csv, "--target", "label",
            ], seed=4))
        a = (tmp_path / "one" / "splits.json").read_bytes()
        b = (tmp_path / "two" / "splits.json").read_bytes()
        assert a == b


class TestTrain:
    def test_reports_and_models(self, runner, dataset_csv, tmp_path):
        result = _ok(_invoke(runner, tmp_path, [
            "train", "--input", dataset_csv, "--target", "label",
            "--repeats", "2", *FAST_TRAIN,
        ]))
        report = _read(tmp_path / "train" / "report.json")
        assert report["command"] == "train"
        assert report["n_repeats"] == 2
        assert report["hyperparams"]["max_rounds"] == 15
        assert report["used_init_scores"] is False
        assert len(report["repeats"]) == 2
        for entry in report["repeats"]:
            assert (tmp_path / "train" / entry["model_file"]).exists()
            assert len(entry["model_digest"]) == 64
        assert 0.5 < report["summary"]["roc_auc"]["mean"] <= 1.0
        assert "repeat 0" in result.output
        assert "test AUC" in result.output

    def test_sensitive_column_adds_parity_summary(self, runner, dataset_csv, tmp_path):
        _ok(_invoke(runner, tmp_path, [
            "train", "--input", dataset_csv, "--target", "label",
            "--sensitive", "sex", "--repeats", "2", *FAST_TRAIN,
        ]))
        report = _read(tmp_path / "train" / "report.json")
        assert "demographic_parity" in report["summary"]
        assert report["repeats"][0]["metrics"]["demographic_parity"] >= 0.0

    def test_quiet_suppresses_output(self, runner, dataset_csv, tmp_path):
        result = runner.invoke(cli.main, [
            "--seed", "11", "--out-dir", str(tmp_path), "--quiet",
            "train", "--input", dataset_csv, "--target", "label",
            "--repeats", "1", *FAST_TRAIN,
        ])
        assert result.exit_code == 0, result.output
        assert result.output.strip() == ""

    def test_subsample_caps_rows(self, runner, dataset_csv, tmp_path):
        _ok(_invoke(runner, tmp_path, [
            "train", "--input", dataset_csv, "--target", "label",
            "--repeats", "1", "--subsample", "120", *FAST_TRAIN,
        ]))
        report = _read(tmp_path / "train" / "report.json")
        assert report["dataset"]["n_rows"] == 120
        assert report["dataset"]["subsample"] == 120

    def test_rerun_identical_outside_timing(self, runner, dataset_csv, tmp_path):
        for name in ("one", "two"):
            _ok(_invoke(runner, tmp_path / name, [
                "train", "--input", dataset_csv, "--target", "label",
                "--repeats", "2", *FAST_TRAIN,
            ], seed=3))
        for rel in ("train/report.json", "train/model_repeat0.json",
                    "train/model_repeat1.json"):
            a = strip_timing(_read(tmp_path / "one" / rel))
            b = strip_timing(_read(tmp_path / "two" / rel))
            assert canonical_json(a) == canonical_json(b), rel


class TestPretrain:
    def test_artifacts(self, runner, dataset_csv, tmp_path):
        result = _ok(_invoke(runner, tmp_path, [
            "pretrain", "--input", dataset_csv, "--target", "label",
            "--labels", "24", "--epochs", "8", "--hidden", "8",
            "--bottleneck", "2",
        ]))
        out = tmp_path / "pretrain"
        pipeline = load_pipeline(out / "pipeline.json")
        assert len(pipeline.labeled_indices) == 24
        report = _read(out / "report.json")
        assert report["command"] == "pretrain"
        assert report["n_labels"] == 24
        assert report["train_only"] is False
        first = report["reconstruction_loss"]["first"]
        last = report["reconstruction_loss"]["last"]
        assert np.isfinite(first) and np.isfinite(last) and last < first
        lines = (out / "init_scores.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "row,partition,init_score"
        assert len(lines) == 241
        partitions = [line.split(",")[1] for line in lines[1:]]
        assert set(partitions) == {"train", "test"}
        assert 55 <= partitions.count("test") <= 65
        assert "reconstruction loss" in result.output

    def test_train_only_flag(self, runner, dataset_csv, tmp_path):
        _ok(_invoke(runner, tmp_path, [
            "pretrain", "--input", dataset_csv, "--target", "label",
            "--labels", "20", "--epochs", "5", "--train-only",
        ]))
        report = _read(tmp_path / "pretrain" / "report.json")
        assert report["train_only"] is True

    def test_init_feeds_train(self, runner, dataset_csv, tmp_path):
        _ok(_invoke(runner, tmp_path, [
            "pretrain", "--input", dataset_csv, "--target", "label",
            "--labels", "24", "--epochs", "8",
        ]))
        _ok(_invoke(runner, tmp_path, [
            "train", "--input", dataset_csv, "--target", "label",
            "--repeats", "1", "--init", str(tmp_path / "pretrain" / "pipeline.json"),
            *FAST_TRAIN,
        ]))
        report = _read(tmp_path / "train" / "report.json")
        assert report["used_init_scores"] is True


class TestTune:
    @pytest.fixture(autouse=True)
    def _tight_space(self, monkeypatch):
        monkeypatch.setattr("glassboost.hpo.default_space", _tiny_space)

    def test_performance_artifacts(self, runner, dataset_csv, tmp_path):
        result = _ok(_invoke(runner, tmp_path, [
            "tune", "--input", dataset_csv, "--target", "label",
            "--trials", "5",
        ]))
        out = tmp_path / "tune_performance"
        study = _read(out / "study_performance.json")
        assert study["format"] == "glassboost-study"
        assert len(study["trials"]) == 5
        best = _read(out / "best_hyperparams.json")
        assert 5 <= best["max_rounds"] <= 15
        assert (out / "tuned_model.json").exists()
        report = _read(out / "report.json")
        assert report["command"] == "tune"
        assert report["objective"] == "performance"
        assert report["best_trial"]["number"] < 5
        assert 0.0 < report["test_metrics"]["roc_auc"] <= 1.0
        assert "baseline" not in report
        assert "best objective" in result.output

    def test_fairness_artifacts(self, runner, dataset_csv, tmp_path, monkeypatch):
        monkeypatch.setattr(cli, "EbmHyperparams", _fast_hp)
        _ok(_invoke(runner, tmp_path, [
            "tune", "--input", dataset_csv, "--target", "label",
            "--sensitive", "sex", "--objective", "fairness", "--trials", "5",
        ]))
        out = tmp_path / "tune_fairness"
        report = _read(out / "report.json")
        assert report["objective"] == "fairness"
        assert "lambda" in report["best_trial"]["params"]
        assert "demographic_parity" in report["test_metrics"]
        assert "demographic_parity" in report["baseline"]["test_metrics"]
        assert report["sensitive_feature"] == "sex"
        assert report["sensitive_rank_baseline"] >= 1
        assert report["sensitive_rank_tuned"] >= 1
        assert (out / "study_fairness.json").exists()

    def test_fairness_without_sensitive_fails(self, runner, dataset_csv, tmp_path):
        result = _invoke(runner, tmp_path, [
            "tune", "--input", dataset_csv, "--target", "label",
            "--objective", "fairness", "--trials", "3",
        ])
        assert result.exit_code == 5
        assert "fairness tuning needs --sensitive" in result.output


@pytest.fixture(scope="module")
def trained(dataset_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    result = CliRunner().invoke(cli.main, [
        "--seed", "11", "--out-dir", str(out),
        "train", "--input", dataset_csv, "--target", "label",
        "--repeats", "1", *FAST_TRAIN,
    ])
    assert result.exit_code == 0, result.output
    return out / "train" / "model_repeat0.json"


class TestEvaluateAndExplain:

    def test_evaluate_writes_metrics(self, runner, dataset_csv, tmp_path, trained):
        result = _ok(_invoke(runner, tmp_path, [
            "evaluate", "--input", dataset_csv, "--target", "label",
            "--sensitive", "sex", "--model", str(trained),
        ]))
        doc = _read(tmp_path / "evaluation.json")
        assert doc["model"] == "model_repeat0.json"
        metrics = doc["metrics"]
        for key in ("roc_auc", "f1", "confusion", "demographic_parity"):
            assert key in metrics
        assert "AUC" in result.output

    def test_evaluate_missing_model(self, runner, dataset_csv, tmp_path):
        result = _invoke(runner, tmp_path, [
            "evaluate", "--input", dataset_csv, "--target", "label",
            "--model", str(tmp_path / "nope.json"),
        ])
        assert result.exit_code == 3

    def test_explain_global_shape_local(self, runner, dataset_csv, tmp_path, trained):
        result = _ok(_invoke(runner, tmp_path, [
            "explain", "--model", str(trained), "--feature", "age",
            "--input", dataset_csv, "--target", "label", "--row", "3",
        ]))
        overview = _read(tmp_path / "explain_global.json")
        importances = [t["importance"] for t in overview["terms"]]
        assert importances == sorted(importances, reverse=True)
        shape = _read(tmp_path / "shape_age.json")
        assert shape["feature"] == "age"
        assert shape["bins"][0]["label"] == "missing"
        local = _read(tmp_path / "explain_row3.json")
        assert 0.0 <= local["probability"] <= 1.0
        assert set(local["contributions"]) == {t["name"] for t in overview["terms"]}
        assert "top terms:" in result.output

    def test_explain_local_needs_row(self, runner, dataset_csv, tmp_path, trained):
        result = _invoke(runner, tmp_path, [
            "explain", "--model", str(trained), "--input", dataset_csv,
            "--target", "label",
        ])
        assert result.exit_code == 5
        assert "--row" in result.output

    def test_explain_row_out_of_range(self, runner, dataset_csv, tmp_path, trained):
        result = _invoke(runner, tmp_path, [
            "explain", "--model", str(trained), "--input", dataset_csv,
            "--target", "label", "--row", "99999",
        ])
        assert result.exit_code == 5

    def test_explain_missing_model(self, runner, tmp_path):
        result = _invoke(runner, tmp_path, [
            "explain", "--model", str(tmp_path / "ghost.json"),
        ])
        assert result.exit_code == 3


class TestValidate:
    def test_report_structure(self, runner, dataset_csv, tmp_path, monkeypatch):
        monkeypatch.setattr(cli, "EbmHyperparams", _fast_hp)
        result = _ok(_invoke(runner, tmp_path, [
            "validate", "--input", dataset_csv, "--target", "label",
            "--repeats", "2", "--labels", "30", "--draws", "5",
        ]))
        report = _read(tmp_path / "validation.json")
        names = [c["name"] for c in report["matrix"]["configs"]]
        assert names == ["baseline", "warm"]
        comparisons = report["matrix"]["comparisons"]
        assert len(comparisons) == 1
        assert 0.0 <= comparisons[0]["p_value"] <= 1.0
        perturbation = report["perturbation"]
        assert perturbation["mean_abs_delta"] >= 0.0
        assert 0.0 <= perturbation["flip_rate"] <= 1.0
        assert "perturbation:" in result.output


class TestBenchmark:
    def test_dry_run_writes_nothing(self, runner, dataset_csv, tmp_path):
        result = _ok(_invoke(runner, tmp_path, [
            "benchmark", "--input", dataset_csv, "--target", "label",
            "--sensitive", "sex", "--dry-run",
        ]))
        assert "plan: baseline, tuned, fair, warm, warm-tuned" in result.output
        assert not (tmp_path / "benchmark").exists()

    def test_dry_run_without_sensitive_skips_fairness(self, runner, dataset_csv,
                                                      tmp_path):
        result = _ok(_invoke(runner, tmp_path, [
            "benchmark", "--input", dataset_csv, "--target", "label", "--dry-run",
        ]))
        assert "fair" not in result.output.replace("fairness", "")
        assert "plan: baseline, tuned, warm, warm-tuned" in result.output

    def test_full_matrix(self, runner, dataset_csv, tmp_path, monkeypatch):
        monkeypatch.setattr("glassboost.hpo.default_space", _tiny_space)
        monkeypatch.setattr(cli, "EbmHyperparams", _fast_hp)
        result = _ok(_invoke(runner, tmp_path, [
            "benchmark", "--input", dataset_csv, "--target", "label",
            "--trials", "3", "--repeats", "2",
        ]))
        report = _read(tmp_path / "benchmark" / "benchmark.json")
        names = [c["name"] for c in report["matrix"]["configs"]]
        assert names == ["baseline", "tuned", "warm", "warm-tuned"]
        assert set(report["study_best_objectives"]) == {"performance"}
        assert len(report["matrix"]["comparisons"]) == 3
        assert (tmp_path / "benchmark" / "study_performance.json").exists()
        assert "(baseline)" in result.output


class TestConfigFile:
    def test_config_defaults_and_cli_override(self, runner, dataset_csv, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "seed": 99,
            "train": {"n_repeats": 2},
            "hyperparams": {
                "max_rounds": 10, "outer_bags": 2,
                "interactions": 0, "early_stopping_patience": 5,
            },
        }), encoding="utf-8")

        result = runner.invoke(cli.main, [
            "--config", str(config), "--out-dir", str(tmp_path / "a"),
            "train", "--input", dataset_csv, "--target", "label",
        ])
        assert result.exit_code == 0, result.output
        report = _read(tmp_path / "a" / "train" / "report.json")
        assert report["seed"] == 99
        assert report["n_repeats"] == 2
        assert report["hyperparams"]["max_rounds"] == 10

        result = runner.invoke(cli.main, [
            "--config", str(config), "--seed", "7",
            "--out-dir", str(tmp_path / "b"),
            "train", "--input", dataset_csv, "--target", "label",
            "--repeats", "1", "--max-rounds", "8",
        ])
        assert result.exit_code == 0, result.output
        report = _read(tmp_path / "b" / "train" / "report.json")
        assert report["seed"] == 7
        assert report["n_repeats"] == 1
        assert report["hyperparams"]["max_rounds"] == 8

    def test_unknown_section_key_rejected(self, runner, dataset_csv, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"train": {"bogus": 1}}), encoding="utf-8")
        result = runner.invoke(cli.main, [
            "--config", str(config), "--out-dir", str(tmp_path),
            "train", "--input", dataset_csv, "--target", "label",
        ])
        assert result.exit_code == 5
        assert "unknown keys" in result.output

    def test_section_must_be_object(self, runner, dataset_csv, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"train": 5}), encoding="utf-8")
        result = runner.invoke(cli.main, [
            "--config", str(config), "--out-dir", str(tmp_path),
            "train", "--input", dataset_csv, "--target", "label",
        ])
        assert result.exit_code == 5

    def test_malformed_config(self, runner, dataset_csv, tmp_path):
        config = tmp_path / "config.json"
        config.write_text("{not json", encoding="utf-8")
        result = runner.invoke(cli.main, [
            "--config", str(config), "--out-dir", str(tmp_path),
            "train", "--input", dataset_csv, "--target", "label",
        ])
        assert result.exit_code == 5

    def test_missing_config_file(self, runner, dataset_csv, tmp_path):
        result = runner.invoke(cli.main, [
            "--config", str(tmp_path / "ghost.json"), "--out-dir", str(tmp_path),
            "train", "--input", dataset_csv, "--target", "label",
        ])
        assert result.exit_code == 3


class TestErrorExits:
    def test_missing_input_file(self, runner, tmp_path):
        result = _invoke(runner, tmp_path, [
            "train", "--input", str(tmp_path / "ghost.csv"), "--target", "label",
        ])
        assert result.exit_code == 3
        assert "no such file" in result.output

    def test_unknown_target_column(self, runner, dataset_csv, tmp_path):
        result = _invoke(runner, tmp_path, [
            "train", "--input", dataset_csv, "--target", "nope",
        ])
        assert result.exit_code == 4
        assert "data error" in result.output

    def test_malformed_target_map(self, runner, dataset_csv, tmp_path):
        result = _invoke(runner, tmp_path, [
            "train", "--input", dataset_csv, "--target", "label",
            "--target-map", "{oops",
        ])
        assert result.exit_code == 5

    def test_target_map_not_covering(self, runner, dataset_csv, tmp_path):
        result = _invoke(runner, tmp_path, [
            "train", "--input", dataset_csv, "--target", "label",
            "--target-map", '{"0": 0}',
        ])
        assert result.exit_code == 4
