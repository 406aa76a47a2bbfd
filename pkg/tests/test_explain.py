import numpy as np
import pytest

from glassboost.dataio import ColumnSchema, TabularFrame
from glassboost.ebm import (
    Bins,
    EbmHyperparams,
    EbmModel,
    TermModel,
    fit,
    predict_proba,
    raw_score,
)
from glassboost.ebm._bins import FeatureBins
from glassboost.explain import (
    explain_global,
    explain_local,
    export_shape_function,
    term_importance,
    term_rank,
)
from glassboost.serialize import read_json


def _toy_model():
    """Hand-built model with known tables for closed-form checks."""
    fb = FeatureBins(
        kind="numeric",
        cuts=np.array([1.0, 2.0]),
        category_bins=np.empty(0, dtype=np.int64),
        overflow_bin=0,
        n_bins=4,
    )
    fc = FeatureBins(
        kind="categorical",
        cuts=np.empty(0),
        category_bins=np.array([1, 2], dtype=np.int64),
        overflow_bin=3,
        n_bins=4,
    )
    terms = [
        TermModel((0,), "x", np.array([0.0, -1.0, 0.5, 2.0]), np.array([1, 4, 3, 2])),
        TermModel((1,), "c", np.array([0.0, 0.25, -0.25, 0.0]), np.array([0, 5, 5, 0])),
    ]
    columns = [
        ColumnSchema("x", "numeric"),
        ColumnSchema("c", "categorical", categories=("red", "blue")),
    ]
    return EbmModel(
        intercept=-0.3,
        terms=terms,
        bins=Bins([fb, fc], max_bins=4),
        columns=columns,
        hyperparams=EbmHyperparams(),
    )


class TestTermImportance:
    def test_density_weighted_mean_absolute_score(self):
        model = _toy_model()
        # (|0|*1 + 1*4 + 0.5*3 + 2*2) / 10
        assert term_importance(model.terms[0]) == pytest.approx(0.95)
        assert term_importance(model.terms[1]) == pytest.approx(0.25)


class TestExplainGlobal:
    def test_ranking_and_fields(self):
        model = _toy_model()
        doc = explain_global(model)
        assert doc["intercept"] == -0.3
        assert [t["name"] for t in doc["terms"]] == ["x", "c"]
        assert [t["rank"] for t in doc["terms"]] == [1, 2]
        assert doc["terms"][0]["kind"] == "main"
        assert doc["terms"][0]["importance"] == pytest.approx(0.95)

    def test_rank_ties_break_by_name(self):
        model = _toy_model()
        model.terms[1] = TermModel(
            (1,), "c", np.array([0.0, 0.95, -0.95, 0.0]), np.array([0, 5, 5, 0])
        )
        doc = explain_global(model)
        assert [t["name"] for t in doc["terms"]] == ["c", "x"]

    def test_term_rank_lookup(self, small_model_and_frame):
        model, _ = small_model_and_frame
        doc = explain_global(model)
        for entry in doc["terms"]:
            assert term_rank(model, entry["name"]) == entry["rank"]
        with pytest.raises(KeyError):
            term_rank(model, "no-such-term")

    def test_interaction_terms_marked(self, small_model_and_frame):
        model, _ = small_model_and_frame
        doc = explain_global(model)
        kinds = {t["name"]: t["kind"] for t in doc["terms"]}
        for term in model.terms:
            want = "interaction" if len(term.features) == 2 else "main"
            assert kinds[term.name] == want


class TestExplainLocal:
    def test_rows_reconstruct_model_predictions(self, small_model_and_frame):
        model, frame = small_model_and_frame
        rows = explain_local(model, frame)
        assert len(rows) == frame.n_rows
        p = predict_proba(model, frame)
        raw = raw_score(model, frame)
        for i, row in enumerate(rows):
            total = row["intercept"] + row["init_score"] + sum(
                row["contributions"].values()
            )
            assert total == pytest.approx(row["raw_score"], abs=1e-9)
            assert row["raw_score"] == pytest.approx(raw[i], abs=1e-12)
            assert row["probability"] == p[i]

    def test_init_scores_included(self, small_model_and_frame):
        model, frame = small_model_and_frame
        init = np.linspace(-1.0, 1.0, frame.n_rows)
        rows = explain_local(model, frame, init_scores=init)
        p = predict_proba(model, frame, init_scores=init)
        for i, row in enumerate(rows):
            assert row["init_score"] == pytest.approx(init[i])
            assert row["probability"] == p[i]

    def test_contribution_keys_are_term_names(self, small_model_and_frame):
        model, frame = small_model_and_frame
        row = explain_local(model, frame.values[:1])[0]
        assert set(row["contributions"]) == {t.name for t in model.terms}


class TestShapeExport:
    def test_numeric_shape_intervals(self):
        model = _toy_model()
        doc = export_shape_function(model, "x")
        assert doc["feature"] == "x"
        assert doc["kind"] == "numeric"
        entries = doc["bins"]
        # missing bin + 3 value bins
        assert entries[0]["bin"] == 0
        assert entries[0]["label"] == "missing"
        assert entries[0]["score"] == 0.0
        intervals = [(e["lo"], e["hi"]) for e in entries[1:]]
        assert intervals == [(None, 1.0), (1.0, 2.0), (2.0, None)]
        assert [e["score"] for e in entries[1:]] == [-1.0, 0.5, 2.0]
        assert [e["density"] for e in entries] == [1, 4, 3, 2]

    def test_categorical_shape_lists_labels(self):
        model = _toy_model()
        doc = export_shape_function(model, "c")
        cats = {tuple(e["categories"]): e["score"] for e in doc["bins"][1:]}
        assert cats[("red",)] == 0.25
        assert cats[("blue",)] == -0.25
        labels = [e["label"] for e in doc["bins"]]
        assert labels[0] == "missing"
        assert labels[3] == "(other)"

    def test_writes_json_file(self, tmp_path):
        model = _toy_model()
        path = tmp_path / "shape.json"
        out = export_shape_function(model, "x", path=path)
        assert read_json(path) == out

    def test_unknown_feature_rejected(self):
        model = _toy_model()
        with pytest.raises(KeyError):
            export_shape_function(model, "nope")

    def test_pair_term_rejected(self, small_model_and_frame):
        model, _ = small_model_and_frame
        pair_names = [t.name for t in model.terms if len(t.features) == 2]
        if pair_names:
            with pytest.raises(ValueError):
                export_shape_function(model, pair_names[0])

    def test_trained_model_round_trip(self, small_model_and_frame):
        model, frame = small_model_and_frame
        doc = export_shape_function(model, "age")
        assert doc["kind"] == "numeric"
        assert len(doc["bins"]) == model.terms[0].scores.shape[0]
