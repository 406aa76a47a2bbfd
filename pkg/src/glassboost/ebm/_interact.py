"""Pairwise interaction screening on boosting residuals.

Each candidate pair is scored by the deviance reduction of the best
single quadrant split of its 2-D residual histogram: one cut per axis,
four leaves. That is a cheap stand-in for fitting a full pair term, good
enough to rank pairs, and the strongest ones get promoted to real terms.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import expit

from ..dataio import TabularFrame
from ._bins import bin_matrix
from ._model import EbmModel, raw_score
from ._trees import _padded_prefix

_EPS = 1e-12


def _pair_gain(G2: np.ndarray, H2: np.ndarray) -> float:
    """Gain of the best 4-quadrant split; 0.0 when no cut is possible."""
    na, nb = G2.shape
    if na < 2 or nb < 2:
        return 0.0
    psG, psH = _padded_prefix(G2), _padded_prefix(H2)
    gt, ht = psG[na, nb], psH[na, nb]

    def quadrants(ps, total):
        a = ps[1:na, 1:nb]
        b = ps[1:na, nb:].reshape(-1, 1) - a
        c = ps[na:, 1:nb].reshape(1, -1) - a
        d = total - a - b - c
        return a, b, c, d

    gain = -gt * gt / (ht + _EPS)
    for gq, hq in zip(quadrants(psG, gt), quadrants(psH, ht)):
        gain = gain + gq * gq / (hq + _EPS)
    return float(gain.max())


def rank_pairs(binned: np.ndarray, n_bins: list[int], g: np.ndarray, h: np.ndarray, k: int):
    """Top-k feature pairs by quadrant gain; ties break lexicographically."""
    d = binned.shape[1]
    if k <= 0 or d < 2:
        return []
    scored = []
    for i, j in itertools.combinations(range(d), 2):
        size = n_bins[i] * n_bins[j]
        flat = binned[:, i].astype(np.int64) * n_bins[j] + binned[:, j]
        G2 = np.bincount(flat, weights=g, minlength=size).reshape(n_bins[i], n_bins[j])
        H2 = np.bincount(flat, weights=h, minlength=size).reshape(n_bins[i], n_bins[j])
        scored.append((_pair_gain(G2, H2), i, j))
    scored.sort(key=lambda t: (-t[0], t[1], t[2]))
    return [(i, j) for _, i, j in scored[:k]]


def detect_interactions(
    frame: TabularFrame,
    model: EbmModel,
    n_interactions: int | None = None,
    init_scores=None,
):
    """Rank feature pairs by residual signal left over by ``model``.

    Residual gradients use the unclamped logistic of the model's raw
    scores, matching what the boosting loop itself sees.
    """
    k = model.hyperparams.interactions if n_interactions is None else int(n_interactions)
    binned = bin_matrix(model.bins, frame.values)
    p = expit(raw_score(model, frame, init_scores))
    y = frame.target.astype(np.float64)
    g = p - y
    h = p * (1.0 - p)
    n_bins = [fb.n_bins for fb in model.bins.features]
    return rank_pairs(binned, n_bins, g, h, k)
