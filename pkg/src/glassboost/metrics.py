"""Ranking, threshold and group-fairness metrics.

Everything here works on plain arrays of labels, scores and group tags;
nothing imports the model, so the same functions serve models, baselines
and hand-made predictions alike.
"""

from __future__ import annotations

import numpy as np


def _labels(y_true) -> np.ndarray:
    y = np.asarray(y_true)
    if y.ndim != 1:
        raise ValueError("labels must be 1-D")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return y.astype(np.int64)


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ordered = values[order]
    # Runs of equal values share the mean of the ranks they span.
    edges = np.flatnonzero(np.r_[True, ordered[1:] != ordered[:-1], True])
    starts, ends = edges[:-1], edges[1:]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def roc_auc(y_true, scores) -> float:
    """Area under the ROC curve via the rank-sum identity.

    Ties in ``scores`` count half, which makes this exactly the pairwise
    probability P(score_pos > score_neg) + 0.5 P(score_pos == score_neg).
    """
    y = _labels(y_true)
    s = np.asarray(scores, dtype=np.float64)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = midranks(s)
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n0 * n1))


def confusion(y_true, scores, threshold: float = 0.5) -> dict:
    """Counts at ``score >= threshold``; keys tn/fp/fn/tp."""
    y = _labels(y_true)
    pred = np.asarray(scores, dtype=np.float64) >= threshold
    return {
        "tn": int(((y == 0) & ~pred).sum()),
        "fp": int(((y == 0) & pred).sum()),
        "fn": int(((y == 1) & ~pred).sum()),
        "tp": int(((y == 1) & pred).sum()),
    }


def f1(y_true, scores, threshold: float = 0.5) -> float:
    c = confusion(y_true, scores, threshold)
    denom = 2 * c["tp"] + c["fp"] + c["fn"]
    if denom == 0:
        return 0.0
    return 2 * c["tp"] / denom


def _group_masks(groups) -> list[np.ndarray]:
    groups = np.asarray(groups, dtype=object)
    labels = sorted({str(g) for g in groups})
    as_str = np.array([str(g) for g in groups], dtype=object)
    return [as_str == label for label in labels]


def demographic_parity(scores, groups, threshold: float = 0.5) -> float:
    """Largest gap in positive-prediction rates between any two groups."""
    pred = np.asarray(scores, dtype=np.float64) >= threshold
    rates = [pred[m].mean() for m in _group_masks(groups) if m.any()]
    if len(rates) < 2:
        return 0.0
    return float(max(rates) - min(rates))


def equalized_odds(y_true, scores, groups, threshold: float = 0.5) -> float:
    """max of the largest TPR gap and the largest FPR gap across groups.

    A group missing a class is left out of that rate's gap; a gap with
    fewer than two participating groups contributes 0.
    """
    y = _labels(y_true)
    pred = np.asarray(scores, dtype=np.float64) >= threshold
    tprs, fprs = [], []
    for m in _group_masks(groups):
        pos = m & (y == 1)
        neg = m & (y == 0)
        if pos.any():
            tprs.append(pred[pos].mean())
        if neg.any():
            fprs.append(pred[neg].mean())
    tpr_gap = max(tprs) - min(tprs) if len(tprs) >= 2 else 0.0
    fpr_gap = max(fprs) - min(fprs) if len(fprs) >= 2 else 0.0
    return float(max(tpr_gap, fpr_gap))


def calibration_bins(y_true, scores, n_bins: int = 10) -> list[dict]:
    """Equal-width reliability bins over [0, 1].

    Empty bins keep their edges but report None for the two means, which
    serializes cleanly to JSON.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    y = _labels(y_true)
    s = np.asarray(scores, dtype=np.float64)
    idx = np.clip((s * n_bins).astype(np.int64), 0, n_bins - 1)
    out = []
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        out.append(
            {
                "lo": b / n_bins,
                "hi": (b + 1) / n_bins,
                "count": count,
                "mean_predicted": float(s[mask].mean()) if count else None,
                "fraction_positive": float(y[mask].mean()) if count else None,
            }
        )
    return out


def evaluate_predictions(
    y_true,
    scores,
    groups=None,
    threshold: float = 0.5,
    n_calibration_bins: int = 10,
) -> dict:
    """One-stop evaluation dict; fairness gaps only when groups are given."""
    report = {
        "roc_auc": roc_auc(y_true, scores),
        "f1": f1(y_true, scores, threshold),
        "threshold": threshold,
        "confusion": confusion(y_true, scores, threshold),
        "calibration": calibration_bins(y_true, scores, n_calibration_bins),
    }
    if groups is not None:
        report["demographic_parity"] = demographic_parity(scores, groups, threshold)
        report["equalized_odds"] = equalized_odds(y_true, scores, groups, threshold)
    return report
