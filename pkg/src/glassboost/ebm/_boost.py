"""Cyclic gradient boosting of score tables with outer bagging.

Training is two-stage. Main effects are boosted round-robin (plus greedy
extra steps on whichever term last gained most) under early stopping on a
per-bag validation slice. The strongest feature pairs are then screened
on the bag-averaged residuals and boosted the same way. Final tables are
bag averages, centered so each term has zero mean under the training bin
distribution, with the offsets folded into the intercept.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..dataio import TabularFrame, _largest_remainder
from ..rng import stream
from ._bins import bin_matrix, build_bins
from ._interact import rank_pairs
from ._model import EbmHyperparams, EbmModel, TermModel
from ._trees import grow_table


@dataclass
class _FitTerm:
    features: tuple[int, ...]
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass
class _Bag:
    boost_idx: np.ndarray
    val_idx: np.ndarray
    y_boost: np.ndarray
    y_val: np.ndarray
    base_boost: np.ndarray  # intercept + init offsets, fixed during boosting
    base_val: np.ndarray
    intercept: float
    rng_inner: np.random.Generator
    tables: list[np.ndarray] = field(default_factory=list)
    flat_boost: list[np.ndarray] = field(default_factory=list)
    flat_val: list[np.ndarray] = field(default_factory=list)
    counts: list[np.ndarray] = field(default_factory=list)
    F_boost: np.ndarray | None = None
    F_val: np.ndarray | None = None

    def add_term(self, term: _FitTerm, binned: np.ndarray, n_bins: list[int]) -> None:
        self.tables.append(np.zeros(term.shape))
        self.flat_boost.append(_flat_ids(binned, term, n_bins, self.boost_idx))
        self.flat_val.append(_flat_ids(binned, term, n_bins, self.val_idx))
        self.counts.append(
            np.bincount(self.flat_boost[-1], minlength=term.size).astype(np.float64)
        )

    def refresh_scores(self) -> None:
        self.F_boost = self.base_boost.copy()
        self.F_val = self.base_val.copy()
        for table, fb, fv in zip(self.tables, self.flat_boost, self.flat_val):
            flat = table.reshape(-1)
            self.F_boost += flat[fb]
            self.F_val += flat[fv]


def _flat_ids(binned, term, n_bins, rows) -> np.ndarray:
    if len(term.features) == 1:
        return binned[rows, term.features[0]].astype(np.int64)
    i, j = term.features
    return binned[rows, i].astype(np.int64) * n_bins[j] + binned[rows, j]


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-(y * np.log(p) + (1 - y) * np.log1p(-p)).mean())


def _logit(p: float) -> float:
    p = min(max(p, 1e-12), 1 - 1e-12)
    return float(np.log(p / (1 - p)))


def _newton_intercept(init: np.ndarray, y: np.ndarray) -> float:
    """Offset minimizing log loss of sigmoid(init + c); 1-D Newton."""
    c = 0.0
    for _ in range(100):
        p = expit(init + c)
        step = float((p - y).sum() / max((p * (1 - p)).sum(), 1e-12))
        c -= step
        if abs(step) < 1e-12:
            break
    return c


def _split_bag(b, frame, hp, use_val):
    n = frame.n_rows
    all_rows = np.arange(n, dtype=np.int64)
    if not use_val:
        return all_rows, np.empty(0, dtype=np.int64)
    class_idx = [np.flatnonzero(frame.target == c) for c in (0, 1)]
    counts = np.array([len(ci) for ci in class_idx])
    if counts.min() < 2:
        # Too small to stratify a holdout; fall back to no validation.
        return all_rows, np.empty(0, dtype=np.int64)
    n_val = int(round(n * hp.validation_fraction))
    n_val = min(max(n_val, 2), n - 2)
    takes = _largest_remainder(counts, n_val, hp.validation_fraction)
    takes = np.clip(takes, 1, counts - 1)
    val_parts, boost_parts = [], []
    for c in (0, 1):
        perm = stream(hp.random_state, "bag", b, c).permutation(class_idx[c])
        val_parts.append(perm[: takes[c]])
        boost_parts.append(perm[takes[c] :])
    return np.sort(np.concatenate(boost_parts)), np.sort(np.concatenate(val_parts))


def _make_bag(b, frame, y, init_scores, hp, use_val, fit_intercept):
    boost_idx, val_idx = _split_bag(b, frame, hp, use_val)
    init_boost = np.zeros(len(boost_idx)) if init_scores is None else init_scores[boost_idx]
    init_val = np.zeros(len(val_idx)) if init_scores is None else init_scores[val_idx]
    y_boost, y_val = y[boost_idx], y[val_idx]
    if not fit_intercept:
        intercept = 0.0
    elif init_scores is None:
        intercept = _logit(float(y_boost.mean()))
    else:
        intercept = _newton_intercept(init_boost, y_boost)
    return _Bag(
        boost_idx=boost_idx,
        val_idx=val_idx,
        y_boost=y_boost,
        y_val=y_val,
        base_boost=init_boost + intercept,
        base_val=init_val + intercept,
        intercept=intercept,
        rng_inner=stream(hp.random_state, "inner", b),
    )


def _boost_step(bag: _Bag, t: int, term: _FitTerm, hp: EbmHyperparams) -> float:
    p = expit(bag.F_boost)
    g = p - bag.y_boost
    h = p * (1.0 - p)
    ids = bag.flat_boost[t]
    size = term.size
    if hp.inner_bags > 0:
        n = len(ids)
        acc = np.zeros(term.shape)
        gain = 0.0
        for _ in range(hp.inner_bags):
            w = np.bincount(
                bag.rng_inner.integers(0, n, size=n), minlength=n
            ).astype(np.float64)
            Gh = np.bincount(ids, weights=g * w, minlength=size).reshape(term.shape)
            Hh = np.bincount(ids, weights=h * w, minlength=size).reshape(term.shape)
            Ch = np.bincount(ids, weights=w, minlength=size).reshape(term.shape)
            tbl, tbl_gain = grow_table(Gh, Hh, Ch, hp.max_leaves, hp.learning_rate)
            acc += tbl
            gain += tbl_gain
        tbl = acc / hp.inner_bags
        gain /= hp.inner_bags
    else:
        Gh = np.bincount(ids, weights=g, minlength=size).reshape(term.shape)
        Hh = np.bincount(ids, weights=h, minlength=size).reshape(term.shape)
        Ch = bag.counts[t].reshape(term.shape)
        tbl, gain = grow_table(Gh, Hh, Ch, hp.max_leaves, hp.learning_rate)
    bag.tables[t] += tbl
    flat = tbl.reshape(-1)
    bag.F_boost += flat[ids]
    if len(bag.flat_val[t]):
        bag.F_val += flat[bag.flat_val[t]]
    return gain


def _boost_stage(bag, terms, stage_ids, hp, n_epochs, use_val) -> int:
    """Boost the given terms for up to ``n_epochs`` epochs; returns epochs run.

    One epoch is a cyclic pass plus round(greedy_ratio * n_terms) greedy
    steps on the term with the largest last recorded gain. Early stopping
    restores the stage's tables from the best validation epoch.
    """
    if not stage_ids or n_epochs <= 0:
        return 0
    gains = np.zeros(len(stage_ids))
    n_greedy = int(round(hp.greedy_ratio * len(stage_ids)))
    best_loss = np.inf
    best_tables = None
    since_best = 0
    epochs_run = 0
    for _ in range(n_epochs):
        for s, t in enumerate(stage_ids):
            gains[s] = _boost_step(bag, t, terms[t], hp)
        for _ in range(n_greedy):
            s = int(np.argmax(gains))
            gains[s] = _boost_step(bag, stage_ids[s], terms[stage_ids[s]], hp)
        epochs_run += 1
        if use_val and len(bag.val_idx):
            loss = _log_loss(bag.y_val, expit(bag.F_val))
            if loss < best_loss:
                best_loss = loss
                best_tables = [bag.tables[t].copy() for t in stage_ids]
                since_best = 0
            else:
                since_best += 1
                if since_best >= hp.early_stopping_patience:
                    break
    if best_tables is not None:
        for t, tbl in zip(stage_ids, best_tables):
            bag.tables[t] = tbl
        bag.refresh_scores()
    return epochs_run


def fit(
    frame: TabularFrame,
    hyperparams: EbmHyperparams | None = None,
    init_scores=None,
    fit_intercept: bool = True,
) -> EbmModel:
    """Train an additive model on ``frame``.

    ``init_scores`` are fixed per-row raw offsets (e.g. from a pretrained
    head); boosting then fits the residual structure on top of them. With
    ``fit_intercept=False`` the intercept is pinned at zero, so a model
    trained with ``max_rounds=0`` predicts exactly sigmoid(init_scores).
    """
    started = time.perf_counter()
    hp = hyperparams if hyperparams is not None else EbmHyperparams()
    if init_scores is not None:
        init_scores = np.asarray(init_scores, dtype=np.float64)
        if init_scores.shape != (frame.n_rows,):
            raise ValueError("init_scores length must match the row count")
    y = frame.target.astype(np.float64)
    bins = build_bins(frame, hp.max_bins)
    binned = bin_matrix(bins, frame.values)
    n_bins = [fb.n_bins for fb in bins.features]
    d = len(bins.features)

    terms = [_FitTerm((j,), (n_bins[j],)) for j in range(d)]
    main_ids = list(range(d))
    use_val = (
        hp.max_rounds > 0
        and hp.validation_fraction > 0
        and hp.early_stopping_patience > 0
    )

    bags = []
    rounds_mains = []
    for b in range(hp.outer_bags):
        bag = _make_bag(b, frame, y, init_scores, hp, use_val, fit_intercept)
        for term in terms:
            bag.add_term(term, binned, n_bins)
        bag.refresh_scores()
        rounds_mains.append(_boost_stage(bag, terms, main_ids, hp, hp.max_rounds, use_val))
        bags.append(bag)

    pairs = []
    rounds_pairs = []
    if hp.interactions > 0 and d >= 2 and hp.max_rounds > 0:
        avg_intercept = float(np.mean([bag.intercept for bag in bags]))
        F_full = np.full(frame.n_rows, avg_intercept)
        if init_scores is not None:
            F_full += init_scores
        for t, term in enumerate(terms):
            flat = np.mean([bag.tables[t] for bag in bags], axis=0).reshape(-1)
            F_full += flat[_flat_ids(binned, term, n_bins, slice(None))]
        p = expit(F_full)
        pairs = rank_pairs(binned, n_bins, p - y, p * (1.0 - p), hp.interactions)
        if pairs:
            pair_ids = []
            for i, j in pairs:
                terms.append(_FitTerm((i, j), (n_bins[i], n_bins[j])))
                pair_ids.append(len(terms) - 1)
            pair_epochs = max(1, hp.max_rounds // 4)
            for bag in bags:
                for t in pair_ids:
                    bag.add_term(terms[t], binned, n_bins)
                bag.refresh_scores()
                rounds_pairs.append(
                    _boost_stage(bag, terms, pair_ids, hp, pair_epochs, use_val)
                )

    feature_names = frame.feature_names
    intercept = float(np.mean([bag.intercept for bag in bags]))
    out_terms = []
    for t, term in enumerate(terms):
        scores = np.mean([bag.tables[t] for bag in bags], axis=0)
        density = np.bincount(
            _flat_ids(binned, term, n_bins, slice(None)), minlength=term.size
        ).reshape(term.shape)
        offset = float((scores * density).sum() / density.sum())
        scores = scores - offset
        intercept += offset
        name = " & ".join(feature_names[f] for f in term.features)
        out_terms.append(TermModel(term.features, name, scores, density))

    meta = {
        "n_rows": int(frame.n_rows),
        "n_features": d,
        "positive_rate": float(y.mean()),
        "early_stopping": bool(use_val),
        "fit_intercept": bool(fit_intercept),
        "used_init_scores": init_scores is not None,
        "pairs": [[int(i), int(j)] for i, j in pairs],
        "rounds": {"mains": rounds_mains, "pairs": rounds_pairs},
        "timing": {"fit_seconds": time.perf_counter() - started},
    }
    return EbmModel(
        intercept=intercept,
        terms=out_terms,
        bins=bins,
        columns=list(frame.columns),
        hyperparams=hp,
        training_meta=meta,
    )
