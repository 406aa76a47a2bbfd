"""Glassbox inspection: term importances, shape functions, row breakdowns.

A fitted model is a sum of lookup tables, so explanation is exact reading
rather than approximation: global importance is the training-weighted
mean absolute score of each term, and a local explanation is the actual
addends behind one prediction.
"""

from __future__ import annotations

import numpy as np

from .dataio import NUMERIC
from .ebm import EbmModel, raw_score, sigmoid, term_contributions
from .serialize import write_json


def term_importance(term) -> float:
    """Mean |score| weighted by the training bin distribution."""
    total = term.density.sum()
    if total == 0:
        return 0.0
    return float((np.abs(term.scores) * term.density).sum() / total)


def explain_global(model: EbmModel) -> dict:
    """Terms ranked by importance (rank 1 = most important)."""
    rows = []
    for term in model.terms:
        rows.append(
            {
                "name": term.name,
                "features": list(term.features),
                "kind": "interaction" if len(term.features) == 2 else "main",
                "importance": term_importance(term),
            }
        )
    rows.sort(key=lambda r: (-r["importance"], r["name"]))
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return {"intercept": float(model.intercept), "terms": rows}


def term_rank(model: EbmModel, name: str) -> int:
    for row in explain_global(model)["terms"]:
        if row["name"] == name:
            return row["rank"]
    raise KeyError(name)


def explain_local(model: EbmModel, data, init_scores=None) -> list[dict]:
    """Exact additive breakdown of each row's prediction.

    ``raw_score`` is computed by the model's own prediction path, so
    applying the model link to it reproduces ``predict_proba`` bit for
    bit, while the listed contributions sum (with the intercept and any
    init offset) to the same raw score up to float reordering.
    """
    contribs = term_contributions(model, data)
    raw = raw_score(model, data, init_scores)
    proba = sigmoid(raw)
    names = [t.name for t in model.terms]
    out = []
    for r in range(contribs.shape[0]):
        out.append(
            {
                "intercept": float(model.intercept),
                "init_score": float(init_scores[r]) if init_scores is not None else 0.0,
                "contributions": {n: float(v) for n, v in zip(names, contribs[r])},
                "raw_score": float(raw[r]),
                "probability": float(proba[r]),
            }
        )
    return out


def _numeric_shape(model, term, feature_bins):
    cuts = [float(c) for c in feature_bins.cuts]
    edges = [None] + cuts + [None]  # None stands in for the open ends
    entries = [
        {
            "bin": 0,
            "label": "missing",
            "score": float(term.scores[0]),
            "density": int(term.density[0]),
        }
    ]
    for b in range(1, len(term.scores)):
        entries.append(
            {
                "bin": b,
                "lo": edges[b - 1],
                "hi": edges[b],
                "score": float(term.scores[b]),
                "density": int(term.density[b]),
            }
        )
    return entries


def _categorical_shape(model, term, feature_bins, schema):
    per_bin: dict[int, list[str]] = {}
    for cat_index, b in enumerate(feature_bins.category_bins):
        per_bin.setdefault(int(b), []).append(schema.categories[cat_index])
    entries = []
    for b in range(len(term.scores)):
        if b == 0:
            label = "missing"
        elif b == feature_bins.overflow_bin:
            label = "(other)"
        else:
            label = ", ".join(per_bin.get(b, []))
        entries.append(
            {
                "bin": b,
                "label": label,
                "categories": per_bin.get(b, []),
                "score": float(term.scores[b]),
                "density": int(term.density[b]),
            }
        )
    return entries


def export_shape_function(model: EbmModel, feature_name: str, path=None) -> dict:
    """Plot-ready description of one main-effect curve.

    Numeric features list half-open value ranges per bin (open ends are
    null); categorical features list the member categories per bin.
    """
    j = model.term_index(feature_name)
    term = model.terms[j]
    if len(term.features) != 1:
        raise ValueError("shape functions exist for main terms only")
    feature = term.features[0]
    schema = model.columns[feature]
    feature_bins = model.bins.features[feature]
    if schema.kind == NUMERIC:
        entries = _numeric_shape(model, term, feature_bins)
    else:
        entries = _categorical_shape(model, term, feature_bins, schema)
    doc = {
        "feature": feature_name,
        "kind": schema.kind,
        "intercept": float(model.intercept),
        "importance": term_importance(term),
        "bins": entries,
    }
    if path is not None:
        write_json(path, doc)
    return doc
