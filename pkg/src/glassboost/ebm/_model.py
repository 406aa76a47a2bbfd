"""Model containers, the prediction path and JSON persistence."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from ..dataio import ColumnSchema, TabularFrame
from ..serialize import payload_digest, read_json, write_json
from ._bins import Bins, bin_matrix

# Raw scores are clamped before the sigmoid so serialized probabilities
# never underflow to exact 0/1.
RAW_SCORE_LIMIT = 30.0


def sigmoid(raw_scores) -> np.ndarray:
    """The model link: clamped raw scores through the logistic function."""
    raw_scores = np.asarray(raw_scores, dtype=np.float64)
    return expit(np.clip(raw_scores, -RAW_SCORE_LIMIT, RAW_SCORE_LIMIT))


@dataclass(frozen=True)
class EbmHyperparams:
    learning_rate: float = 0.01
    max_bins: int = 256
    max_leaves: int = 3
    max_rounds: int = 1000
    interactions: int = 10
    outer_bags: int = 8
    inner_bags: int = 0
    greedy_ratio: float = 1.5
    random_state: int = 1337
    validation_fraction: float = 0.15
    early_stopping_patience: int = 50

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_bins < 2:
            raise ValueError("max_bins must be >= 2")
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be >= 1")
        if self.max_rounds < 0 or self.interactions < 0 or self.inner_bags < 0:
            raise ValueError("counts must be non-negative")
        if self.outer_bags < 1:
            raise ValueError("outer_bags must be >= 1")
        if self.greedy_ratio < 0:
            raise ValueError("greedy_ratio must be >= 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.early_stopping_patience < 0:
            raise ValueError("early_stopping_patience must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EbmHyperparams":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown hyperparameters: {sorted(extra)}")
        return cls(**doc)

    def updated(self, **changes) -> "EbmHyperparams":
        return replace(self, **changes)


@dataclass
class TermModel:
    """One additive term: a score lookup table over one or two features."""

    features: tuple[int, ...]
    name: str
    scores: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        self.features = tuple(int(f) for f in self.features)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.density = np.asarray(self.density, dtype=np.int64)
        if len(self.features) not in (1, 2):
            raise ValueError("terms cover one or two features")
        if self.scores.ndim != len(self.features):
            raise ValueError("score table rank must match the feature count")
        if self.scores.shape != self.density.shape:
            raise ValueError("scores and density must share a shape")


@dataclass
class EbmModel:
    intercept: float
    terms: list[TermModel]
    bins: Bins
    columns: list[ColumnSchema]
    hyperparams: EbmHyperparams
    training_meta: dict = field(default_factory=dict)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def term_index(self, name: str) -> int:
        for i, term in enumerate(self.terms):
            if term.name == name:
                return i
        raise KeyError(name)


def _as_values(data) -> np.ndarray:
    if isinstance(data, TabularFrame):
        return data.values
    return np.asarray(data, dtype=np.float64)


def term_contributions(model: EbmModel, data) -> np.ndarray:
    """Per-row, per-term raw score contributions; shape (n_rows, n_terms)."""
    values = _as_values(data)
    binned = bin_matrix(model.bins, values)
    out = np.zeros((len(values), len(model.terms)))
    for t, term in enumerate(model.terms):
        if len(term.features) == 1:
            out[:, t] = term.scores[binned[:, term.features[0]]]
        else:
            i, j = term.features
            out[:, t] = term.scores[binned[:, i], binned[:, j]]
    return out


def raw_score(model: EbmModel, data, init_scores=None) -> np.ndarray:
    """Additive raw score: intercept + term contributions (+ init offsets)."""
    values = _as_values(data)
    raw = model.intercept + term_contributions(model, values).sum(axis=1)
    if init_scores is not None:
        init_scores = np.asarray(init_scores, dtype=np.float64)
        if init_scores.shape != (len(values),):
            raise ValueError("init_scores length must match the row count")
        raw = raw + init_scores
    return raw


def predict_proba(model: EbmModel, data, init_scores=None) -> np.ndarray:
    return sigmoid(raw_score(model, data, init_scores))


def model_to_payload(model: EbmModel) -> dict:
    return {
        "format": "glassboost-ebm",
        "version": 1,
        "intercept": float(model.intercept),
        "terms": [
            {
                "features": list(t.features),
                "name": t.name,
                "scores": t.scores.tolist(),
                "density": t.density.tolist(),
            }
            for t in model.terms
        ],
        "bins": model.bins.to_payload(),
        "columns": [
            {
                "name": c.name,
                "kind": c.kind,
                "categories": list(c.categories),
                "missing_count": int(c.missing_count),
            }
            for c in model.columns
        ],
        "hyperparams": model.hyperparams.to_dict(),
        "training_meta": model.training_meta,
    }


def model_from_payload(doc: dict) -> EbmModel:
    if doc.get("format") != "glassboost-ebm":
        raise ValueError("not a glassboost model payload")
    terms = [
        TermModel(
            features=tuple(t["features"]),
            name=t["name"],
            scores=np.asarray(t["scores"], dtype=np.float64),
            density=np.asarray(t["density"], dtype=np.int64),
        )
        for t in doc["terms"]
    ]
    columns = [
        ColumnSchema(
            name=c["name"],
            kind=c["kind"],
            categories=tuple(c["categories"]),
            missing_count=int(c["missing_count"]),
        )
        for c in doc["columns"]
    ]
    return EbmModel(
        intercept=float(doc["intercept"]),
        terms=terms,
        bins=Bins.from_payload(doc["bins"]),
        columns=columns,
        hyperparams=EbmHyperparams.from_dict(doc["hyperparams"]),
        training_meta=doc.get("training_meta", {}),
    )


def save_model(model: EbmModel, path) -> None:
    write_json(path, model_to_payload(model))


def load_model(path) -> EbmModel:
    return model_from_payload(read_json(path))


def model_digest(model: EbmModel) -> str:
    """Digest of everything the model computes with; timing is excluded."""
    return payload_digest(model_to_payload(model))
