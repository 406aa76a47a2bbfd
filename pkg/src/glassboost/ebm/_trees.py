"""Histogram regression trees flattened into additive score tables.

Trees split aggregated (gradient, hessian, count) histograms, never raw
rows, which keeps boosting rounds cheap. Main effects are 1-D histograms;
pairs are 2-D grids split by axis-aligned cuts. A fitted tree is returned
directly as a lookup table over the bin grid, so no tree structure
survives fitting and any empty bin simply inherits its covering leaf.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12
_LEAF_LIMIT = 10.0


def _padded_prefix(a: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    out[1:, 1:] = a.cumsum(axis=0).cumsum(axis=1)
    return out


def _rect(ps: np.ndarray, a0: int, a1: int, b0: int, b1: int) -> float:
    return ps[a1, b1] - ps[a0, b1] - ps[a1, b0] + ps[a0, b0]


def _best_split(psG, psH, psC, a0, a1, b0, b1, min_count):
    """Best axis-aligned cut of the rectangle; (gain, axis, cut position).

    Gain is the Newton deviance proxy GL^2/HL + GR^2/HR - Gp^2/Hp. Ties go
    to axis 0 and to the smallest cut, so growth is fully deterministic.
    """
    gp = _rect(psG, a0, a1, b0, b1)
    hp = _rect(psH, a0, a1, b0, b1)
    parent = gp * gp / (hp + _EPS)
    best_gain, best_axis, best_cut = 0.0, -1, -1
    for axis, lo, hi in ((0, a0, a1), (1, b0, b1)):
        if hi - lo < 2:
            continue
        cuts = np.arange(lo + 1, hi)
        if axis == 0:
            gl = psG[cuts, b1] - psG[a0, b1] - psG[cuts, b0] + psG[a0, b0]
            hl = psH[cuts, b1] - psH[a0, b1] - psH[cuts, b0] + psH[a0, b0]
            cl = psC[cuts, b1] - psC[a0, b1] - psC[cuts, b0] + psC[a0, b0]
        else:
            gl = psG[a1, cuts] - psG[a0, cuts] - psG[a1, b0] + psG[a0, b0]
            hl = psH[a1, cuts] - psH[a0, cuts] - psH[a1, b0] + psH[a0, b0]
            cl = psC[a1, cuts] - psC[a0, cuts] - psC[a1, b0] + psC[a0, b0]
        cp = _rect(psC, a0, a1, b0, b1)
        gr, hr, cr = gp - gl, hp - hl, cp - cl
        valid = (cl >= min_count) & (cr >= min_count)
        if not valid.any():
            continue
        gain = gl * gl / (hl + _EPS) + gr * gr / (hr + _EPS) - parent
        gain[~valid] = -np.inf
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain, best_axis, best_cut = float(gain[i]), axis, int(cuts[i])
    return best_gain, best_axis, best_cut


def grow_table(G, H, C, max_leaves: int, learning_rate: float, min_count: float = 1.0):
    """Fit one tree on binned aggregates; return (scaled table, realized gain).

    ``G``/``H``/``C`` share a 1-D or 2-D shape; the returned table matches
    it. Leaf values are Newton steps -G/(H+eps), clamped to +-10 before
    learning-rate scaling so near-zero hessians cannot blow up a step.
    """
    shape = np.shape(G)
    G2 = np.asarray(G, dtype=np.float64)
    H2 = np.asarray(H, dtype=np.float64)
    C2 = np.asarray(C, dtype=np.float64)
    if G2.ndim == 1:
        G2, H2, C2 = G2[:, None], H2[:, None], C2[:, None]
    if not (G2.shape == H2.shape == C2.shape) or G2.ndim != 2:
        raise ValueError("G, H and C must share a 1-D or 2-D shape")
    if max_leaves < 1:
        raise ValueError("max_leaves must be >= 1")

    psG, psH, psC = _padded_prefix(G2), _padded_prefix(H2), _padded_prefix(C2)
    leaves = [(0, G2.shape[0], 0, G2.shape[1])]
    best = [_best_split(psG, psH, psC, *leaves[0], min_count)]
    realized = 0.0
    while len(leaves) < max_leaves:
        i = max(range(len(leaves)), key=lambda k: best[k][0])
        gain, axis, cut = best[i]
        if gain <= 0.0:
            break
        a0, a1, b0, b1 = leaves[i]
        if axis == 0:
            left, right = (a0, cut, b0, b1), (cut, a1, b0, b1)
        else:
            left, right = (a0, a1, b0, cut), (a0, a1, cut, b1)
        realized += gain
        # The left child takes the parent's slot, so earlier nodes keep
        # winning gain ties and growth order stays reproducible.
        leaves[i] = left
        best[i] = _best_split(psG, psH, psC, *left, min_count)
        leaves.append(right)
        best.append(_best_split(psG, psH, psC, *right, min_count))

    table = np.zeros(G2.shape)
    for a0, a1, b0, b1 in leaves:
        g = _rect(psG, a0, a1, b0, b1)
        h = _rect(psH, a0, a1, b0, b1)
        value = float(np.clip(-g / (h + _EPS), -_LEAF_LIMIT, _LEAF_LIMIT))
        table[a0:a1, b0:b1] = value * learning_rate
    return table.reshape(shape), realized
