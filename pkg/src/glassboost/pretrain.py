"""Self-supervised warm starts for boosting.

An autoencoder is trained to reconstruct encoded feature rows (labels
never enter this step), a logistic head is fitted on the bottleneck
embedding of a small labeled subset, and the head's per-row log-odds
become initial raw scores for boosting. The point is to move the starting
point of boosting toward something informed when labels are scarce.

The autoencoder is deliberately small and written in plain numpy:
d -> hidden (relu) -> bottleneck (linear) -> hidden (relu) -> d (linear),
trained by mini-batch SGD on mean squared reconstruction error, with an
analytic backward pass that is finite-difference checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataio import NUMERIC, TabularFrame
from .rng import stream
from .serialize import read_json, write_json


class TrainingDiverged(RuntimeError):
    """Reconstruction loss became non-finite or exploded during training."""


# ---------------------------------------------------------------------------
# Feature encoding

@dataclass
class TabularEncoder:
    """Dense encoding of a frame: standardized numerics, one-hot categories.

    Missing cells encode to zeros; every feature that had a missing cell
    when the encoder was fitted also gets a 0/1 missing-indicator column,
    so missingness stays visible to the autoencoder.
    """

    means: list[float] = field(default_factory=list)
    stds: list[float] = field(default_factory=list)
    indicator: list[bool] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)
    category_counts: list[int] = field(default_factory=list)

    def fit(self, frame: TabularFrame) -> "TabularEncoder":
        self.means, self.stds, self.indicator = [], [], []
        self.kinds, self.category_counts = [], []
        for j, schema in enumerate(frame.columns):
            column = frame.values[:, j]
            present = column[~np.isnan(column)]
            self.kinds.append(schema.kind)
            self.indicator.append(bool(np.isnan(column).any()))
            if schema.kind == NUMERIC:
                mean = float(present.mean()) if present.size else 0.0
                std = float(present.std()) if present.size else 0.0
                self.means.append(mean)
                self.stds.append(std if std > 0 else 1.0)
                self.category_counts.append(0)
            else:
                self.means.append(0.0)
                self.stds.append(1.0)
                self.category_counts.append(len(schema.categories))
        return self

    @property
    def width(self) -> int:
        total = 0
        for kind, n_cat, ind in zip(self.kinds, self.category_counts, self.indicator):
            total += 1 if kind == NUMERIC else n_cat
            total += 1 if ind else 0
        return total

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        n = len(values)
        blocks = []
        for j, kind in enumerate(self.kinds):
            column = values[:, j]
            missing = np.isnan(column)
            if kind == NUMERIC:
                z = np.where(missing, 0.0, (column - self.means[j]) / self.stds[j])
                blocks.append(z[:, None])
            else:
                n_cat = self.category_counts[j]
                onehot = np.zeros((n, n_cat))
                idx = column[~missing].astype(np.int64)
                valid = (idx >= 0) & (idx < n_cat)
                rows = np.flatnonzero(~missing)[valid]
                onehot[rows, idx[valid]] = 1.0
                blocks.append(onehot)
            if self.indicator[j]:
                blocks.append(missing.astype(np.float64)[:, None])
        return np.concatenate(blocks, axis=1) if blocks else np.zeros((n, 0))

    def to_payload(self) -> dict:
        return {
            "means": self.means,
            "stds": self.stds,
            "indicator": self.indicator,
            "kinds": self.kinds,
            "category_counts": self.category_counts,
        }

    @classmethod
    def from_payload(cls, doc) -> "TabularEncoder":
        return cls(
            means=[float(v) for v in doc["means"]],
            stds=[float(v) for v in doc["stds"]],
            indicator=[bool(v) for v in doc["indicator"]],
            kinds=list(doc["kinds"]),
            category_counts=[int(v) for v in doc["category_counts"]],
        )


# ---------------------------------------------------------------------------
# Autoencoder

@dataclass(frozen=True)
class AutoencoderConfig:
    hidden: int | None = None      # default min(64, 2 * width)
    bottleneck: int | None = None  # default max(2, ceil(width / 4))
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    divergence_factor: float = 50.0  # abort if loss exceeds factor * initial

    def resolve(self, width: int) -> tuple[int, int]:
        hidden = self.hidden if self.hidden is not None else min(64, max(2, 2 * width))
        bottleneck = (
            self.bottleneck
            if self.bottleneck is not None
            else max(2, math.ceil(width / 4))
        )
        return int(hidden), int(bottleneck)

    def to_payload(self) -> dict:
        return {
            "hidden": self.hidden,
            "bottleneck": self.bottleneck,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "divergence_factor": self.divergence_factor,
        }

    @classmethod
    def from_payload(cls, doc) -> "AutoencoderConfig":
        return cls(
            hidden=doc["hidden"],
            bottleneck=doc["bottleneck"],
            epochs=int(doc["epochs"]),
            batch_size=int(doc["batch_size"]),
            learning_rate=float(doc["learning_rate"]),
            seed=int(doc["seed"]),
            divergence_factor=float(doc["divergence_factor"]),
        )


_PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")


@dataclass
class Autoencoder:
    params: dict[str, np.ndarray]

    @classmethod
    def initialize(cls, width: int, hidden: int, bottleneck: int, seed: int) -> "Autoencoder":
        sizes = [(width, hidden), (hidden, bottleneck), (bottleneck, hidden), (hidden, width)]
        params: dict[str, np.ndarray] = {}
        for layer, (fan_in, fan_out) in enumerate(sizes, start=1):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            rng = stream(seed, "ae-init", layer)
            params[f"W{layer}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            params[f"b{layer}"] = np.zeros(fan_out)
        return cls(params)

    def _forward(self, X: np.ndarray):
        p = self.params
        a1 = X @ p["W1"] + p["b1"]
        h1 = np.maximum(a1, 0.0)
        z = h1 @ p["W2"] + p["b2"]
        a3 = z @ p["W3"] + p["b3"]
        h3 = np.maximum(a3, 0.0)
        recon = h3 @ p["W4"] + p["b4"]
        return a1, h1, z, a3, h3, recon

    def encode(self, X: np.ndarray) -> np.ndarray:
        return self._forward(np.asarray(X, dtype=np.float64))[2]

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        return self._forward(np.asarray(X, dtype=np.float64))[5]

    def loss(self, X: np.ndarray) -> float:
        X = np.asarray(X, dtype=np.float64)
        recon = self._forward(X)[5]
        return float(np.mean((recon - X) ** 2))

    def gradients(self, X: np.ndarray) -> dict[str, np.ndarray]:
        """Analytic gradients of the mean squared error over all cells."""
        p = self.params
        X = np.asarray(X, dtype=np.float64)
        a1, h1, z, a3, h3, recon = self._forward(X)
        d_recon = 2.0 * (recon - X) / X.size
        grads = {
            "W4": h3.T @ d_recon,
            "b4": d_recon.sum(axis=0),
        }
        d_h3 = d_recon @ p["W4"].T
        d_a3 = d_h3 * (a3 > 0)
        grads["W3"] = z.T @ d_a3
        grads["b3"] = d_a3.sum(axis=0)
        d_z = d_a3 @ p["W3"].T
        grads["W2"] = h1.T @ d_z
        grads["b2"] = d_z.sum(axis=0)
        d_h1 = d_z @ p["W2"].T
        d_a1 = d_h1 * (a1 > 0)
        grads["W1"] = X.T @ d_a1
        grads["b1"] = d_a1.sum(axis=0)
        return grads

    def to_payload(self) -> dict:
        return {name: self.params[name].tolist() for name in _PARAM_NAMES}

    @classmethod
    def from_payload(cls, doc) -> "Autoencoder":
        return cls({name: np.asarray(doc[name], dtype=np.float64) for name in _PARAM_NAMES})


def train_autoencoder(
    X: np.ndarray, config: AutoencoderConfig | None = None
) -> tuple[Autoencoder, list[float]]:
    """Mini-batch SGD on reconstruction error; returns (model, loss history).

    The history holds the full-data loss after each epoch. Raises
    :class:`TrainingDiverged` if the loss leaves the finite range or
    exceeds ``divergence_factor`` times the starting loss.
    """
    config = config if config is not None else AutoencoderConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    hidden, bottleneck = config.resolve(X.shape[1])
    model = Autoencoder.initialize(X.shape[1], hidden, bottleneck, config.seed)
    initial = model.loss(X)
    ceiling = config.divergence_factor * max(initial, 1e-12)
    history = []
    n = len(X)
    for epoch in range(config.epochs):
        order = stream(config.seed, "ae-shuffle", epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            batch = X[order[start : start + config.batch_size]]
            grads = model.gradients(batch)
            for name in _PARAM_NAMES:
                model.params[name] -= config.learning_rate * grads[name]
        loss = model.loss(X)
        if not math.isfinite(loss) or loss > ceiling:
            raise TrainingDiverged(
                f"reconstruction loss {loss!r} at epoch {epoch} "
                f"(started at {initial:.6g}); lower the learning rate"
            )
        history.append(loss)
    return model, history


def gradient_check(model: Autoencoder, X: np.ndarray, step: float = 1e-5) -> float:
    """Max relative gap between analytic and central-difference gradients.

    Checks every coordinate of every parameter tensor; the relative gap
    is |a - n| / max(1e-8, |a| + |n|).
    """
    X = np.asarray(X, dtype=np.float64)
    analytic = model.gradients(X)
    worst = 0.0
    for name in _PARAM_NAMES:
        tensor = model.params[name]
        flat = tensor.reshape(-1)
        for i in range(flat.size):
            kept = flat[i]
            flat[i] = kept + step
            up = model.loss(X)
            flat[i] = kept - step
            down = model.loss(X)
            flat[i] = kept
            numeric = (up - down) / (2.0 * step)
            a = float(analytic[name].reshape(-1)[i])
            gap = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, gap)
    return worst


# ---------------------------------------------------------------------------
# Logistic head on the embedding

@dataclass
class LogisticHead:
    weights: np.ndarray
    bias: float
    l2: float
    n_iterations: int
    grad_norm: float

    def raw(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) @ self.weights + self.bias

    def proba(self, Z: np.ndarray) -> np.ndarray:
        return expit(self.raw(Z))

    def to_payload(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "l2": float(self.l2),
            "n_iterations": int(self.n_iterations),
            "grad_norm": float(self.grad_norm),
        }

    @classmethod
    def from_payload(cls, doc) -> "LogisticHead":
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            l2=float(doc["l2"]),
            n_iterations=int(doc["n_iterations"]),
            grad_norm=float(doc["grad_norm"]),
        )


def fit_head(
    Z: np.ndarray,
    y: np.ndarray,
    l2: float = 1e-2,
    max_iterations: int = 10_000,
    tolerance: float = 1e-6,
) -> LogisticHead:
    """L2-regularized logistic regression by full-batch gradient descent.

    The step size is 1/L for the loss's Lipschitz constant
    L = sigma_max(Z')^2 / (4n) + l2, which makes descent monotone without
    any line search or randomness. The bias is unpenalized.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = Z.shape
    Z1 = np.column_stack([Z, np.ones(n)])
    sigma_max = float(np.linalg.svd(Z1, compute_uv=False)[0])
    step = 1.0 / (sigma_max**2 / (4.0 * n) + l2)
    w = np.zeros(k + 1)
    penalty = np.ones(k + 1)
    penalty[-1] = 0.0  # bias is not shrunk
    grad_norm = np.inf
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        p = expit(Z1 @ w)
        grad = Z1.T @ (p - y) / n + l2 * penalty * w
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < tolerance:
            break
        w = w - step * grad
    return LogisticHead(
        weights=w[:-1],
        bias=float(w[-1]),
        l2=l2,
        n_iterations=iterations,
        grad_norm=grad_norm,
    )


def make_init_scores(head: LogisticHead, Z: np.ndarray) -> np.ndarray:
    """Per-row initial raw scores: log-odds of the head's probabilities.

    Probabilities are clamped away from 0/1 so the scores stay finite and
    boosting on top of them remains well-conditioned.
    """
    p = np.clip(head.proba(Z), 1e-6, 1.0 - 1e-6)
    return np.log(p / (1.0 - p))


# ---------------------------------------------------------------------------
# End-to-end pipeline

@dataclass
class InitScorePipeline:
    encoder: TabularEncoder
    autoencoder: Autoencoder
    head: LogisticHead
    config: AutoencoderConfig
    loss_history: list[float]
    labeled_indices: list[int]

    def init_scores(self, values: np.ndarray) -> np.ndarray:
        Z = self.encoder.transform(values)
        return make_init_scores(self.head, self.autoencoder.encode(Z))

    def to_payload(self) -> dict:
        return {
            "format": "glassboost-init",
            "version": 1,
            "encoder": self.encoder.to_payload(),
            "autoencoder": self.autoencoder.to_payload(),
            "head": self.head.to_payload(),
            "config": self.config.to_payload(),
            "loss_history": self.loss_history,
            "labeled_indices": self.labeled_indices,
        }

    @classmethod
    def from_payload(cls, doc) -> "InitScorePipeline":
        if doc.get("format") != "glassboost-init":
            raise ValueError("not an init-score pipeline payload")
        return cls(
            encoder=TabularEncoder.from_payload(doc["encoder"]),
            autoencoder=Autoencoder.from_payload(doc["autoencoder"]),
            head=LogisticHead.from_payload(doc["head"]),
            config=AutoencoderConfig.from_payload(doc["config"]),
            loss_history=[float(v) for v in doc["loss_history"]],
            labeled_indices=[int(v) for v in doc["labeled_indices"]],
        )


def save_pipeline(pipeline: InitScorePipeline, path) -> None:
    write_json(path, pipeline.to_payload())


def load_pipeline(path) -> InitScorePipeline:
    return InitScorePipeline.from_payload(read_json(path))


def build_init_pipeline(
    frame: TabularFrame,
    labeled_indices,
    config: AutoencoderConfig | None = None,
    l2: float = 1e-2,
) -> InitScorePipeline:
    """Fit encoder + autoencoder on features, head on the labeled subset.

    The autoencoder sees the features of every row in ``frame`` (labels
    are never used); only rows in ``labeled_indices`` contribute their
    targets, via the logistic head on their embeddings.
    """
    config = config if config is not None else AutoencoderConfig()
    labeled = np.asarray(labeled_indices, dtype=np.int64)
    if labeled.size < 2:
        raise ValueError("need at least 2 labeled rows")
    encoder = TabularEncoder().fit(frame)
    Z = encoder.transform(frame.values)
    autoencoder, history = train_autoencoder(Z, config)
    embedding = autoencoder.encode(Z)
    head = fit_head(embedding[labeled], frame.target[labeled], l2=l2)
    return InitScorePipeline(
        encoder=encoder,
        autoencoder=autoencoder,
        head=head,
        config=config,
        loss_history=history,
        labeled_indices=[int(i) for i in labeled],
    )
