"""CSV ingestion, schema inference and seeded stratified splitting.

A :class:`TabularFrame` is the toolkit's in-memory dataset: a float64 cell
matrix (categoricals stored as category indices, missing as NaN), a binary
target and an optional sensitive-group vector. Column kinds are inferred
with a single deterministic rule -- a column is numeric iff every
non-missing cell parses as a real -- and can be overridden per column.

Missing cells are the empty string or ``"?"`` (the Adult dataset
convention); they are kept as an explicit marker and never imputed here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .rng import stream

MISSING_TOKENS = {"", "?"}

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class DatasetError(ValueError):
    """Raised for unusable input data (bad target, empty file, ...)."""


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    categories: tuple[str, ...] = ()
    missing_count: int = 0

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown column kind {self.kind!r}")
        if self.kind == NUMERIC and self.categories:
            raise ValueError(f"numeric column {self.name!r} carries categories")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"duplicate category labels in column {self.name!r}")


@dataclass
class TabularFrame:
    """Column-typed dataset with target and optional sensitive attribute.

    ``values[r, c]`` holds a real number for numeric columns, a category
    index (as float) for categorical columns, or NaN for a missing cell.
    """

    columns: list[ColumnSchema]
    values: np.ndarray
    target: np.ndarray
    sensitive: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        if self.values.shape[1] != len(self.columns):
            raise ValueError("column count does not match schema")
        self.target = np.asarray(self.target, dtype=np.int8)
        if self.target.shape != (self.values.shape[0],):
            raise ValueError("target length does not match row count")
        if not np.isin(self.target, (0, 1)).all():
            raise ValueError("target must contain only {0, 1}")
        if self.sensitive is not None:
            self.sensitive = np.asarray(self.sensitive, dtype=object)
            if self.sensitive.shape != (self.values.shape[0],):
                raise ValueError("sensitive length does not match row count")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def subset(self, indices) -> "TabularFrame":
        """Row subset sharing this frame's schema (category order intact)."""
        idx = np.asarray(indices, dtype=np.int64)
        return TabularFrame(
            columns=list(self.columns),
            values=self.values[idx],
            target=self.target[idx],
            sensitive=None if self.sensitive is None else self.sensitive[idx],
        )

    def equals(self, other: "TabularFrame") -> bool:
        if [c for c in self.columns] != [c for c in other.columns]:
            return False
        if self.values.shape != other.values.shape:
            return False
        same_cells = np.array_equal(self.values, other.values, equal_nan=True)
        same_target = np.array_equal(self.target, other.target)
        if self.sensitive is None or other.sensitive is None:
            same_sens = self.sensitive is None and other.sensitive is None
        else:
            same_sens = np.array_equal(self.sensitive, other.sensitive)
        return bool(same_cells and same_target and same_sens)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float
    n_repeats: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")


def _parses_as_real(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _read_cells(path) -> pd.DataFrame:
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"empty file: {path}") from None
    if raw.shape[0] == 0:
        raise DatasetError(f"no data rows in {path}")
    for col in raw.columns:
        raw[col] = raw[col].str.strip()
    return raw


def _map_target(tokens: pd.Series, override) -> np.ndarray:
    missing = tokens.isin(MISSING_TOKENS)
    if missing.any():
        raise DatasetError(f"{int(missing.sum())} missing target cells")
    distinct = sorted(tokens.unique())
    if isinstance(override, dict):
        mapping = {str(k): int(v) for k, v in override.items()}
        unknown = [t for t in distinct if t not in mapping]
        if unknown:
            raise DatasetError(f"target values {unknown} absent from override map")
        if set(mapping.values()) - {0, 1}:
            raise DatasetError("target override map must send labels to 0 or 1")
        return tokens.map(mapping).to_numpy(dtype=np.int8)
    if len(distinct) != 2:
        raise DatasetError(
            f"target has {len(distinct)} distinct values; supply an override map"
        )
    if override is not None:
        positive = str(override)
        if positive not in distinct:
            raise DatasetError(f"positive label {positive!r} not among {distinct}")
    else:
        # Minority label is the positive class; lexicographically larger wins ties.
        counts = tokens.value_counts()
        a, b = distinct
        if counts[a] == counts[b]:
            positive = max(a, b)
        else:
            positive = a if counts[a] < counts[b] else b
    return (tokens == positive).to_numpy(dtype=np.int8)


def load_csv(
    path,
    target_column: str,
    sensitive_column: str | None = None,
    schema_overrides: dict | None = None,
) -> TabularFrame:
    """Parse a headered CSV into a :class:`TabularFrame`.

    ``schema_overrides`` maps a feature column to a kind (``"numeric"`` /
    ``"categorical"``) and may map the target column to either the positive
    label or a full ``{raw label -> 0/1}`` dict (required when the raw
    target has more than two distinct values).
    """
    overrides = dict(schema_overrides or {})
    raw = _read_cells(path)
    if target_column not in raw.columns:
        raise DatasetError(f"target column {target_column!r} not in {list(raw.columns)}")
    if sensitive_column is not None and sensitive_column not in raw.columns:
        raise DatasetError(f"sensitive column {sensitive_column!r} not present")

    target = _map_target(raw[target_column], overrides.pop(target_column, None))

    columns: list[ColumnSchema] = []
    mats: list[np.ndarray] = []
    for name in raw.columns:
        if name == target_column:
            continue
        tokens = raw[name]
        missing = tokens.isin(MISSING_TOKENS).to_numpy()
        present = tokens[~missing]
        kind = overrides.get(name)
        if kind is None:
            kind = NUMERIC if all(_parses_as_real(t) for t in present) else CATEGORICAL
        elif kind not in (NUMERIC, CATEGORICAL):
            raise DatasetError(f"override for {name!r} must be numeric or categorical")

        cells = np.full(len(tokens), np.nan)
        if kind == NUMERIC:
            # Unparsable cells under a numeric override are treated as missing.
            ok = ~missing & tokens.apply(_parses_as_real).to_numpy()
            cells[ok] = tokens[ok].astype(np.float64)
            categories: tuple[str, ...] = ()
            missing = ~ok
        else:
            cats: list[str] = []
            index: dict[str, int] = {}
            for t in present:
                if t not in index:
                    index[t] = len(cats)
                    cats.append(t)
            cells[~missing] = [index[t] for t in present]
            categories = tuple(cats)
        columns.append(
            ColumnSchema(name, kind, categories, missing_count=int(missing.sum()))
        )
        mats.append(cells)

    values = np.column_stack(mats) if mats else np.empty((len(raw), 0))
    sensitive = None
    if sensitive_column is not None:
        sensitive = raw[sensitive_column].to_numpy(dtype=object)
    return TabularFrame(columns=columns, values=values, target=target, sensitive=sensitive)


def _format_cell(value: float, schema: ColumnSchema) -> str:
    if math.isnan(value):
        return ""
    if schema.kind == CATEGORICAL:
        return schema.categories[int(value)]
    return repr(float(value))


def write_csv(frame: TabularFrame, path, target_column: str = "target") -> None:
    """Write the frame back to CSV; targets become ``0``/``1`` labels.

    Reloading with ``schema_overrides={target_column: {"0": 0, "1": 1}}``
    plus the original kind overrides reproduces the frame cell for cell.
    """
    cols = {}
    for j, schema in enumerate(frame.columns):
        cols[schema.name] = [_format_cell(v, schema) for v in frame.values[:, j]]
    cols[target_column] = [str(int(t)) for t in frame.target]
    pd.DataFrame(cols).to_csv(path, index=False)


def _largest_remainder(counts: np.ndarray, total: int, fraction: float) -> np.ndarray:
    """Allocate ``total`` picks over classes proportionally to ``fraction``."""
    exact = counts * fraction
    base = np.floor(exact).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(exact - base), kind="stable")
        for c in order[:short]:
            base[c] += 1
    elif short < 0:
        order = np.argsort(exact - base, kind="stable")
        for c in order[: -short]:
            base[c] -= 1
    return base


def stratified_splits(frame: TabularFrame, spec: SplitSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded stratified shuffle splits; one (train, test) pair per repeat.

    Rows are shuffled within each class using a stream derived from
    (seed, repeat, class); the shuffled prefix becomes the test set. Test
    sizes follow largest-remainder allocation so the test positive rate
    matches the global rate to within one row.
    """
    y = frame.target
    n = frame.n_rows
    class_idx = [np.flatnonzero(y == c) for c in (0, 1)]
    counts = np.array([len(ci) for ci in class_idx])
    if (counts < 2).any():
        raise DatasetError("each class needs at least 2 rows to stratify")

    n_test = int(round(n * spec.test_fraction))
    n_test = min(max(n_test, 2), n - 2)
    takes = _largest_remainder(counts, n_test, spec.test_fraction)
    takes = np.clip(takes, 1, counts - 1)

    splits = []
    for r in range(spec.n_repeats):
        test_parts = []
        train_parts = []
        for c in (0, 1):
            perm = stream(spec.seed, "split", r, c).permutation(class_idx[c])
            test_parts.append(perm[: takes[c]])
            train_parts.append(perm[takes[c] :])
        test = np.sort(np.concatenate(test_parts))
        train = np.sort(np.concatenate(train_parts))
        splits.append((train, test))
    return splits


def stratified_label_subset(
    frame: TabularFrame, n_labels: int, seed: int, tag: str = "labels"
) -> np.ndarray:
    """Pick ``n_labels`` row indices with class proportions matching the frame.

    ``tag`` names the random stream, so different callers (label budgets,
    row subsampling) draw independent subsets from the same seed.
    """
    if n_labels < 2:
        raise DatasetError("n_labels must be >= 2")
    if n_labels > frame.n_rows:
        raise DatasetError(f"n_labels={n_labels} exceeds row count {frame.n_rows}")
    y = frame.target
    class_idx = [np.flatnonzero(y == c) for c in (0, 1)]
    if any(len(ci) == 0 for ci in class_idx):
        raise DatasetError("both classes must be present")
    takes = _largest_remainder(
        np.array([len(ci) for ci in class_idx]), n_labels, n_labels / frame.n_rows
    )
    takes = np.clip(takes, 0, [len(ci) for ci in class_idx])
    parts = []
    for c in (0, 1):
        perm = stream(seed, tag, c).permutation(class_idx[c])
        parts.append(perm[: takes[c]])
    return np.sort(np.concatenate(parts))


def save_split_manifest(splits, path) -> None:
    doc = [
        {"repeat": r, "train": train.tolist(), "test": test.tolist()}
        for r, (train, test) in enumerate(splits)
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def load_split_manifest(path) -> list[tuple[np.ndarray, np.ndarray]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [
        (np.asarray(e["train"], dtype=np.int64), np.asarray(e["test"], dtype=np.int64))
        for e in sorted(doc, key=lambda e: e["repeat"])
    ]
