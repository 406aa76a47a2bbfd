"""Shared fixtures and the acceptance-criteria reporting hook."""

from __future__ import annotations

import numpy as np
import pytest

from glassboost.dataio import ColumnSchema, TabularFrame
from glassboost.rng import stream

# Acceptance tests append (number, status, detail) tuples here; the terminal
# summary prints one line per criterion so results survive output capture.
_CRITERION_RESULTS: list[tuple[int, str, str]] = []


def record_criterion(number: int, status: str, detail: str) -> None:
    _CRITERION_RESULTS.append((number, status, detail))


def check_criterion(number: int, passed: bool, detail: str) -> None:
    record_criterion(number, "PASS" if passed else "FAIL", detail)
    assert passed, f"criterion {number}: {detail}"


def skip_criterion(number: int, reason: str) -> None:
    record_criterion(number, "SKIP", reason)
    pytest.skip(reason)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(_CRITERION_RESULTS):
        terminalreporter.write_line(f"[criterion {number:02d}] {status}: {detail}")


def make_numeric_frame(n_rows: int = 300, n_features: int = 4, seed: int = 7,
                       signal: float = 1.2) -> TabularFrame:
    """Linear-logit synthetic with only numeric columns."""
    rng = stream(seed, "synthetic", "numeric")
    values = rng.normal(0.0, 1.0, size=(n_rows, n_features))
    coefs = rng.normal(0.0, signal, size=n_features)
    logits = values @ coefs
    y = (rng.uniform(size=n_rows) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int8)
    # guard against degenerate draws
    if y.min() == y.max():
        y[: n_rows // 2] = 1 - y[0]
    columns = [ColumnSchema(f"x{i}", "numeric") for i in range(n_features)]
    return TabularFrame(columns=columns, values=values, target=y)


def make_mixed_frame(n_rows: int = 400, seed: int = 11) -> TabularFrame:
    """Numeric + categorical + missing values + a sensitive attribute."""
    rng = stream(seed, "synthetic", "mixed")
    age = rng.uniform(18.0, 80.0, size=n_rows)
    wage = rng.normal(30.0, 9.0, size=n_rows)
    wage[rng.uniform(size=n_rows) < 0.07] = np.nan
    job_labels = ["clerk", "nurse", "pilot"]
    job = rng.integers(0, len(job_labels), size=n_rows)
    group_labels = ["a", "b"]
    group = rng.integers(0, 2, size=n_rows)
    logits = (
        0.06 * (age - 49.0)
        + np.where(np.isnan(wage), 0.0, 0.05 * (wage - 30.0))
        + np.where(job == 2, 1.0, 0.0)
        + np.where(group == 0, 0.6, 0.0)
    )
    y = (rng.uniform(size=n_rows) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int8)
    if y.min() == y.max():
        y[: n_rows // 2] = 1 - y[0]
    values = np.column_stack([age, wage, job.astype(np.float64)])
    columns = [
        ColumnSchema("age", "numeric"),
        ColumnSchema("wage", "numeric", missing_count=int(np.isnan(wage).sum())),
        ColumnSchema("job", "categorical", categories=tuple(job_labels)),
    ]
    sensitive = np.array([group_labels[g] for g in group], dtype=object)
    return TabularFrame(columns=columns, values=values, target=y, sensitive=sensitive)


def make_xor_frame(n_rows: int = 2000, seed: int = 3, noise: float = 0.05) -> TabularFrame:
    """Two uniform features whose XOR of signs determines the label."""
    rng = stream(seed, "synthetic", "xor")
    values = rng.uniform(-1.0, 1.0, size=(n_rows, 2))
    y = ((values[:, 0] > 0.0) ^ (values[:, 1] > 0.0)).astype(np.int8)
    flip = rng.uniform(size=n_rows) < noise
    y[flip] = 1 - y[flip]
    columns = [ColumnSchema("u", "numeric"), ColumnSchema("v", "numeric")]
    return TabularFrame(columns=columns, values=values, target=y)


@pytest.fixture
def numeric_frame() -> TabularFrame:
    return make_numeric_frame()


@pytest.fixture
def mixed_frame() -> TabularFrame:
    return make_mixed_frame()


@pytest.fixture(scope="session")
def small_model_and_frame():
    """One inexpensive trained model shared by read-only tests."""
    from glassboost.ebm import EbmHyperparams, fit

    frame = make_mixed_frame(n_rows=300, seed=23)
    hp = EbmHyperparams(max_rounds=40, outer_bags=2, interactions=1,
                        early_stopping_patience=10)
    return fit(frame, hp), frame
