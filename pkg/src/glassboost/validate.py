"""Statistical checks: paired significance, noise sensitivity, run matrices.

``wilcoxon_signed_rank`` is self-contained because the contract here is
specific: midranks for tied magnitudes, zero differences dropped, an
exact tail probability for small samples (computed by dynamic programming
over sign assignments) and a tie-corrected normal approximation with
continuity correction above that.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataio import NUMERIC, SplitSpec, TabularFrame, stratified_label_subset, stratified_splits
from .ebm import EbmHyperparams, EbmModel, fit, predict_proba
from .metrics import demographic_parity, f1, midranks, roc_auc
from .pretrain import (
    AutoencoderConfig,
    TabularEncoder,
    fit_head,
    make_init_scores,
    train_autoencoder,
)
from .rng import stream

EXACT_LIMIT = 20  # largest n for the exact sign-assignment distribution


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str


def _normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _exact_p(doubled: np.ndarray, observed_doubled: int) -> float:
    """P(min(W+, W-) <= observed) over all 2^n sign assignments.

    Ranks arrive doubled so midranks (multiples of 1/2) become integers
    and the distribution fits an integer-indexed table.
    """
    total = int(doubled.sum())
    dp = np.zeros(total + 1)
    dp[0] = 1.0
    for r in doubled:
        nxt = dp.copy()
        nxt[r:] += dp[: total + 1 - r]
        dp = nxt
    s = np.arange(total + 1)
    hit = (s <= observed_doubled) | (s >= total - observed_doubled)
    return float(dp[hit].sum() / 2 ** len(doubled))


def wilcoxon_signed_rank(a, b) -> SignificanceResult:
    """Two-sided paired test on the differences ``a - b``.

    The statistic is min(W+, W-) over signed midranks of |a - b| with
    zero differences dropped. All-zero differences give p = 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two 1-D arrays of equal length")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        return SignificanceResult(0.0, 1.0, 0, "degenerate")
    magnitude = np.abs(diffs)
    ranks = midranks(magnitude)
    w_pos = float(ranks[diffs > 0].sum())
    w_neg = float(ranks[diffs < 0].sum())
    statistic = min(w_pos, w_neg)

    if n <= EXACT_LIMIT:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        observed = int(np.rint(2.0 * statistic))
        return SignificanceResult(statistic, _exact_p(doubled, observed), n, "exact")

    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(magnitude, return_counts=True)
    variance -= float((tie_counts**3 - tie_counts).sum()) / 48.0
    if variance <= 0:
        return SignificanceResult(statistic, 1.0, n, "normal")
    z = (statistic - mean + 0.5) / math.sqrt(variance)
    p = min(1.0, 2.0 * _normal_cdf(z))
    return SignificanceResult(statistic, p, n, "normal")


def perturbation_sensitivity(
    model: EbmModel,
    frame: TabularFrame,
    noise_scale: float = 0.1,
    n_draws: int = 20,
    seed: int = 0,
    features=None,
) -> dict:
    """Prediction stability under Gaussian noise on numeric inputs.

    Each draw jitters every present numeric cell by N(0, (noise_scale *
    column std)^2); categoricals and missing cells are untouched. Reports
    the mean and max absolute probability change and the decision flip
    rate at the 0.5 threshold, averaged over draws.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    base = predict_proba(model, frame)
    names = frame.feature_names
    if features is None:
        targets = [j for j, c in enumerate(frame.columns) if c.kind == NUMERIC]
    else:
        targets = [frame.column_index(name) for name in features]
        for j in targets:
            if frame.columns[j].kind != NUMERIC:
                raise ValueError(f"{names[j]!r} is not numeric")
    stds = {}
    for j in targets:
        column = frame.values[:, j]
        present = column[~np.isnan(column)]
        stds[j] = float(present.std()) if present.size else 0.0

    mean_deltas, flip_rates, max_delta = [], [], 0.0
    for k in range(n_draws):
        values = frame.values.copy()
        for j in targets:
            if stds[j] == 0.0:
                continue
            mask = ~np.isnan(values[:, j])
            noise = stream(seed, "perturb", k, j).normal(
                0.0, noise_scale * stds[j], size=int(mask.sum())
            )
            values[mask, j] += noise
        p = predict_proba(model, values)
        delta = np.abs(p - base)
        mean_deltas.append(float(delta.mean()))
        max_delta = max(max_delta, float(delta.max()))
        flip_rates.append(float(((p >= 0.5) != (base >= 0.5)).mean()))
    return {
        "noise_scale": noise_scale,
        "n_draws": n_draws,
        "features": [names[j] for j in targets],
        "mean_abs_delta": float(np.mean(mean_deltas)),
        "max_abs_delta": max_delta,
        "flip_rate": float(np.mean(flip_rates)),
    }


@dataclass
class RunConfiguration:
    """One training recipe to compare in a run matrix."""

    name: str
    hyperparams: EbmHyperparams = field(default_factory=EbmHyperparams)
    use_init: bool = False
    labeled_fraction: float = 0.1
    n_labels: int | None = None
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    pretrain_on_train_only: bool = False


def _summary(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


class _EmbeddingCache:
    """Deduplicates autoencoder training across configurations.

    The default (transductive) mode trains the autoencoder once on the
    features of every row; labels never enter, so this leaks nothing.
    """

    def __init__(self, frame: TabularFrame):
        self.frame = frame
        self._cache: dict[str, tuple[TabularEncoder, np.ndarray]] = {}

    def embedding(self, config: AutoencoderConfig, rows=None):
        key = repr(sorted(config.to_payload().items()))
        if rows is not None:
            key += f"|rows:{hash(rows.tobytes())}"
        if key not in self._cache:
            sub = self.frame if rows is None else self.frame.subset(rows)
            encoder = TabularEncoder().fit(sub)
            Z = encoder.transform(self.frame.values)
            model, _ = train_autoencoder(encoder.transform(sub.values), config)
            self._cache[key] = (encoder, model.encode(Z))
        return self._cache[key]


def run_matrix(
    frame: TabularFrame,
    configurations: list[RunConfiguration],
    split_spec: SplitSpec,
) -> dict:
    """Train and evaluate every configuration over shared repeated splits.

    All configurations see identical train/test partitions per repeat, so
    per-repeat metrics are paired and the first configuration serves as
    the baseline for Wilcoxon comparisons on test AUC.
    """
    if not configurations:
        raise ValueError("need at least one configuration")
    names = [c.name for c in configurations]
    if len(set(names)) != len(names):
        raise ValueError("configuration names must be unique")
    splits = stratified_splits(frame, split_spec)
    cache = _EmbeddingCache(frame)
    started = time.perf_counter()

    config_rows = []
    for config in configurations:
        repeats = []
        for r, (train_idx, test_idx) in enumerate(splits):
            train = frame.subset(train_idx)
            fit_started = time.perf_counter()
            init_train = init_test = None
            if config.use_init:
                rows = train_idx if config.pretrain_on_train_only else None
                encoder, embedding = cache.embedding(config.autoencoder, rows)
                n_labels = config.n_labels
                if n_labels is None:
                    n_labels = max(2, int(round(config.labeled_fraction * len(train_idx))))
                labeled_local = stratified_label_subset(
                    train, n_labels, seed=split_spec.seed + r
                )
                labeled = train_idx[labeled_local]
                head = fit_head(embedding[labeled], frame.target[labeled])
                init_full = make_init_scores(head, embedding)
                init_train = init_full[train_idx]
                init_test = init_full[test_idx]
            model = fit(train, config.hyperparams, init_scores=init_train)
            test = frame.subset(test_idx)
            scores = predict_proba(model, test, init_scores=init_test)
            entry = {
                "repeat": r,
                "roc_auc": roc_auc(test.target, scores),
                "f1": f1(test.target, scores),
                "timing": {"fit_seconds": time.perf_counter() - fit_started},
            }
            if test.sensitive is not None:
                entry["demographic_parity"] = demographic_parity(scores, test.sensitive)
            repeats.append(entry)
        summary = {
            "roc_auc": _summary([e["roc_auc"] for e in repeats]),
            "f1": _summary([e["f1"] for e in repeats]),
        }
        if frame.sensitive is not None:
            summary["demographic_parity"] = _summary(
                [e["demographic_parity"] for e in repeats]
            )
        config_rows.append({"name": config.name, "repeats": repeats, "summary": summary})

    baseline = config_rows[0]
    comparisons = []
    for row in config_rows[1:]:
        result = wilcoxon_signed_rank(
            [e["roc_auc"] for e in row["repeats"]],
            [e["roc_auc"] for e in baseline["repeats"]],
        )
        comparisons.append(
            {
                "baseline": baseline["name"],
                "candidate": row["name"],
                "metric": "roc_auc",
                "statistic": result.statistic,
                "p_value": result.p_value,
                "n_effective": result.n_effective,
                "method": result.method,
            }
        )
    return {
        "n_repeats": split_spec.n_repeats,
        "test_fraction": split_spec.test_fraction,
        "seed": split_spec.seed,
        "configs": config_rows,
        "comparisons": comparisons,
        "timing": {"total_seconds": time.perf_counter() - started},
    }


def matrix_markdown(result: dict) -> str:
    """Render a run-matrix result as a compact markdown table."""
    has_dp = any("demographic_parity" in c["summary"] for c in result["configs"])
    header = ["configuration", "test AUC", "F1"]
    if has_dp:
        header.append("DP gap")
    header.append("p vs baseline")
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    p_by_name = {c["candidate"]: c["p_value"] for c in result["comparisons"]}
    for row in result["configs"]:
        s = row["summary"]
        cells = [
            row["name"],
            f"{s['roc_auc']['mean']:.5f} +- {s['roc_auc']['std']:.5f}",
            f"{s['f1']['mean']:.5f}",
        ]
        if has_dp:
            dp = s.get("demographic_parity")
            cells.append(f"{dp['mean']:.5f}" if dp else "-")
        p = p_by_name.get(row["name"])
        cells.append(f"{p:.4f}" if p is not None else "(baseline)")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)
