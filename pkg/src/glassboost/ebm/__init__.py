"""Glassbox boosted additive models over binned features."""

from ._bins import Bins, FeatureBins, MISSING_BIN, bin_matrix, build_bins
from ._boost import fit
from ._interact import detect_interactions, rank_pairs
from ._model import (
    EbmHyperparams,
    EbmModel,
    RAW_SCORE_LIMIT,
    TermModel,
    load_model,
    model_digest,
    model_from_payload,
    model_to_payload,
    predict_proba,
    raw_score,
    save_model,
    sigmoid,
    term_contributions,
)
from ._trees import grow_table

__all__ = [
    "Bins",
    "FeatureBins",
    "MISSING_BIN",
    "RAW_SCORE_LIMIT",
    "EbmHyperparams",
    "EbmModel",
    "TermModel",
    "bin_matrix",
    "build_bins",
    "detect_interactions",
    "fit",
    "grow_table",
    "load_model",
    "model_digest",
    "model_from_payload",
    "model_to_payload",
    "predict_proba",
    "rank_pairs",
    "raw_score",
    "save_model",
    "sigmoid",
    "term_contributions",
]
