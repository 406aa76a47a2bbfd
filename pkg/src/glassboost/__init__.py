"""Glassbox gradient-boosted additive models for binary classification.

The model is a sum of per-feature (and selected pairwise) score tables
fitted by cyclic gradient boosting, so every prediction decomposes into
exact per-feature contributions. On top of that sit a seeded Parzen-based
hyperparameter search with an optional fairness-penalized objective, and
an autoencoder warm-start path for label-scarce training.
"""

from .dataio import (
    ColumnSchema,
    DatasetError,
    SplitSpec,
    TabularFrame,
    load_csv,
    stratified_label_subset,
    stratified_splits,
    write_csv,
)
from .ebm import (
    EbmHyperparams,
    EbmModel,
    TermModel,
    build_bins,
    detect_interactions,
    fit,
    load_model,
    predict_proba,
    raw_score,
    save_model,
)
from .explain import explain_global, explain_local, export_shape_function
from .hpo import (
    SearchSpace,
    Study,
    default_space,
    objective_fairness,
    objective_performance,
    run_study,
    tpe_suggest,
)
from .metrics import (
    calibration_bins,
    confusion,
    demographic_parity,
    equalized_odds,
    f1,
    roc_auc,
)
from .pretrain import (
    AutoencoderConfig,
    InitScorePipeline,
    build_init_pipeline,
    fit_head,
    gradient_check,
    make_init_scores,
    train_autoencoder,
)
from .validate import (
    RunConfiguration,
    perturbation_sensitivity,
    run_matrix,
    wilcoxon_signed_rank,
)

__version__ = "0.1.0"

__all__ = [
    "AutoencoderConfig",
    "ColumnSchema",
    "DatasetError",
    "EbmHyperparams",
    "EbmModel",
    "InitScorePipeline",
    "RunConfiguration",
    "SearchSpace",
    "SplitSpec",
    "Study",
    "TabularFrame",
    "TermModel",
    "build_bins",
    "build_init_pipeline",
    "calibration_bins",
    "confusion",
    "default_space",
    "demographic_parity",
    "detect_interactions",
    "equalized_odds",
    "explain_global",
    "explain_local",
    "export_shape_function",
    "f1",
    "fit",
    "fit_head",
    "gradient_check",
    "load_csv",
    "load_model",
    "make_init_scores",
    "objective_fairness",
    "objective_performance",
    "perturbation_sensitivity",
    "predict_proba",
    "raw_score",
    "roc_auc",
    "run_matrix",
    "run_study",
    "save_model",
    "stratified_label_subset",
    "stratified_splits",
    "tpe_suggest",
    "train_autoencoder",
    "wilcoxon_signed_rank",
    "write_csv",
]
