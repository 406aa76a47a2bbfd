"""Per-feature binning: quantile cuts for numerics, index maps for categoricals.

Bin 0 is reserved for missing cells on every feature, so score tables
always carry an explicit missing entry. Numeric bins are quantile based;
categorical features keep one bin per category until the bin budget runs
out, after which the rarest categories share an overflow bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataio import CATEGORICAL, NUMERIC, TabularFrame

MISSING_BIN = 0


@dataclass
class FeatureBins:
    kind: str
    cuts: np.ndarray
    category_bins: np.ndarray
    overflow_bin: int
    n_bins: int

    def lookup(self, column: np.ndarray) -> np.ndarray:
        """Map raw cell values to bin ids; NaN always maps to bin 0."""
        column = np.asarray(column, dtype=np.float64)
        out = np.zeros(len(column), dtype=np.int32)
        present = ~np.isnan(column)
        if self.kind == NUMERIC:
            out[present] = 1 + np.searchsorted(self.cuts, column[present], side="left")
        elif present.any():
            idx = column[present].astype(np.int64)
            known = (idx >= 0) & (idx < len(self.category_bins))
            mapped = np.full(len(idx), self.overflow_bin, dtype=np.int32)
            mapped[known] = self.category_bins[idx[known]]
            out[present] = mapped
        return out

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "cuts": [float(c) for c in self.cuts],
            "category_bins": [int(b) for b in self.category_bins],
            "overflow_bin": int(self.overflow_bin),
            "n_bins": int(self.n_bins),
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "FeatureBins":
        return cls(
            kind=doc["kind"],
            cuts=np.asarray(doc["cuts"], dtype=np.float64),
            category_bins=np.asarray(doc["category_bins"], dtype=np.int64),
            overflow_bin=int(doc["overflow_bin"]),
            n_bins=int(doc["n_bins"]),
        )


@dataclass
class Bins:
    features: list[FeatureBins]
    max_bins: int

    def to_payload(self) -> dict:
        return {
            "max_bins": int(self.max_bins),
            "features": [fb.to_payload() for fb in self.features],
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "Bins":
        return cls(
            features=[FeatureBins.from_payload(d) for d in doc["features"]],
            max_bins=int(doc["max_bins"]),
        )


def _numeric_feature(column: np.ndarray, max_bins: int) -> FeatureBins:
    finite = column[~np.isnan(column)]
    if finite.size:
        cuts = np.unique(np.quantile(finite, np.arange(1, max_bins) / max_bins))
        # A cut at the maximum would leave the top bin empty; drop it.
        cuts = cuts[cuts < finite.max()]
    else:
        cuts = np.empty(0, dtype=np.float64)
    return FeatureBins(NUMERIC, cuts, np.empty(0, dtype=np.int64), 0, len(cuts) + 2)


def _categorical_feature(column: np.ndarray, n_categories: int, max_bins: int) -> FeatureBins:
    present = column[~np.isnan(column)].astype(np.int64)
    counts = np.bincount(present, minlength=n_categories)
    keep = min(n_categories, max_bins - 1)
    by_frequency = np.lexsort((np.arange(n_categories), -counts))
    kept = np.sort(by_frequency[:keep])
    overflow = keep + 1
    category_bins = np.full(n_categories, overflow, dtype=np.int64)
    category_bins[kept] = np.arange(1, keep + 1)
    return FeatureBins(CATEGORICAL, np.empty(0, dtype=np.float64), category_bins, overflow, keep + 2)


def build_bins(frame: TabularFrame, max_bins: int = 256) -> Bins:
    """Choose bin boundaries per feature from the rows of ``frame``."""
    if max_bins < 2:
        raise ValueError("max_bins must be >= 2")
    features = []
    for j, schema in enumerate(frame.columns):
        column = frame.values[:, j]
        if schema.kind == NUMERIC:
            features.append(_numeric_feature(column, max_bins))
        else:
            features.append(_categorical_feature(column, len(schema.categories), max_bins))
    return Bins(features, max_bins)


def bin_matrix(bins: Bins, values: np.ndarray) -> np.ndarray:
    """Bin ids for every cell of ``values``; shape (n_rows, n_features)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(bins.features):
        raise ValueError("values shape does not match the binned feature count")
    if not bins.features:
        return np.zeros((len(values), 0), dtype=np.int32)
    return np.column_stack(
        [fb.lookup(values[:, j]) for j, fb in enumerate(bins.features)]
    )
