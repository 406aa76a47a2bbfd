"""Seeded hyperparameter search with a tree-structured Parzen sampler.

Trials minimize a scalar objective. The first trials sample each
parameter from its prior; after that the history is split into a good
fraction and the rest, each side is modeled by a truncated-Gaussian
mixture centered on its observations (plus a uniform prior component),
and the next point is the candidate maximizing the good/bad density
ratio. Everything is driven by named seed streams, so a study is a pure
function of (data, space, seed) and can be resumed mid-way from disk.

The fairness objective scalarizes accuracy and group parity: it adds
``lambda * demographic_parity`` to ``1 - roc_auc`` and lets the search
pick ``lambda`` alongside the model hyperparameters.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .dataio import SplitSpec, TabularFrame, stratified_splits
from .ebm import EbmHyperparams, fit, predict_proba
from .metrics import demographic_parity, roc_auc
from .rng import stream
from .serialize import read_json, write_json

UNIFORM = "uniform"
LOG_UNIFORM = "log_uniform"
INTEGER = "integer"

N_STARTUP_TRIALS = 10
N_CANDIDATES = 24


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    low: float
    high: float

    def __post_init__(self):
        if self.kind not in (UNIFORM, LOG_UNIFORM, INTEGER):
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        if not self.low < self.high:
            raise ValueError(f"{self.name}: low must be < high")
        if self.kind == LOG_UNIFORM and self.low <= 0:
            raise ValueError(f"{self.name}: log_uniform bounds must be positive")
        if self.kind == INTEGER and (
            self.low != int(self.low) or self.high != int(self.high)
        ):
            raise ValueError(f"{self.name}: integer bounds must be whole numbers")

    # Transformed domain: the space the kernels live in.
    def domain(self) -> tuple[float, float]:
        if self.kind == LOG_UNIFORM:
            return math.log(self.low), math.log(self.high)
        if self.kind == INTEGER:
            return self.low - 0.5, self.high + 0.5
        return self.low, self.high

    def to_internal(self, value) -> float:
        return math.log(value) if self.kind == LOG_UNIFORM else float(value)

    def to_value(self, x: float):
        if self.kind == LOG_UNIFORM:
            return float(math.exp(x))
        if self.kind == INTEGER:
            return int(np.clip(round(x), self.low, self.high))
        return float(np.clip(x, self.low, self.high))

    def to_payload(self) -> dict:
        return {"name": self.name, "kind": self.kind, "low": self.low, "high": self.high}


@dataclass
class SearchSpace:
    params: list[ParamSpec]

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")

    def to_payload(self) -> list[dict]:
        return [p.to_payload() for p in self.params]

    @classmethod
    def from_payload(cls, doc) -> "SearchSpace":
        return cls([ParamSpec(**entry) for entry in doc])


def default_space(objective: str = "performance") -> SearchSpace:
    params = [
        ParamSpec("learning_rate", LOG_UNIFORM, 1e-4, 1e-1),
        ParamSpec("max_bins", INTEGER, 64, 512),
        ParamSpec("max_leaves", INTEGER, 2, 64),
        ParamSpec("max_rounds", INTEGER, 50, 2000),
        ParamSpec("interactions", INTEGER, 0, 10),
        ParamSpec("outer_bags", INTEGER, 4, 32),
        ParamSpec("inner_bags", INTEGER, 0, 8),
        ParamSpec("greedy_ratio", UNIFORM, 0.0, 20.0),
    ]
    if objective == "fairness":
        params.append(ParamSpec("lambda", UNIFORM, 0.0, 5.0))
    elif objective != "performance":
        raise ValueError(f"unknown objective {objective!r}")
    return SearchSpace(params)


@dataclass
class TrialRecord:
    number: int
    params: dict
    objective: float
    attrs: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "number": self.number,
            "params": self.params,
            "objective": self.objective,
            "attrs": self.attrs,
            "timing": self.timing,
        }

    @classmethod
    def from_payload(cls, doc) -> "TrialRecord":
        return cls(
            number=int(doc["number"]),
            params=dict(doc["params"]),
            objective=float(doc["objective"]),
            attrs=dict(doc.get("attrs", {})),
            timing=dict(doc.get("timing", {})),
        )


@dataclass
class Study:
    space: SearchSpace
    objective_kind: str
    seed: int
    trials: list[TrialRecord] = field(default_factory=list)

    @property
    def best_trial(self) -> TrialRecord:
        if not self.trials:
            raise ValueError("study has no trials")
        return min(self.trials, key=lambda t: (t.objective, t.number))

    def to_payload(self) -> dict:
        return {
            "format": "glassboost-study",
            "version": 1,
            "objective": self.objective_kind,
            "seed": self.seed,
            "space": self.space.to_payload(),
            "trials": [t.to_payload() for t in self.trials],
        }

    @classmethod
    def from_payload(cls, doc) -> "Study":
        if doc.get("format") != "glassboost-study":
            raise ValueError("not a study payload")
        return cls(
            space=SearchSpace.from_payload(doc["space"]),
            objective_kind=doc["objective"],
            seed=int(doc["seed"]),
            trials=[TrialRecord.from_payload(t) for t in doc["trials"]],
        )


def save_study(study: Study, path) -> None:
    write_json(path, study.to_payload())


def load_study(path) -> Study:
    return Study.from_payload(read_json(path))


# ---------------------------------------------------------------------------
# Sampling

def random_suggest(space: SearchSpace, rng: np.random.Generator) -> dict:
    """One draw from every parameter's prior."""
    out = {}
    for spec in space.params:
        if spec.kind == INTEGER:
            out[spec.name] = int(rng.integers(int(spec.low), int(spec.high) + 1))
        elif spec.kind == LOG_UNIFORM:
            out[spec.name] = float(
                math.exp(rng.uniform(math.log(spec.low), math.log(spec.high)))
            )
        else:
            out[spec.name] = float(rng.uniform(spec.low, spec.high))
    return out


class _Parzen:
    """Truncated-Gaussian mixture over one parameter's transformed domain.

    One component per observation plus a uniform prior component. Each
    component's bandwidth is the larger gap to its sorted neighbors (the
    domain edges act as outermost neighbors), floored at
    width/(m+1): near-duplicate observations therefore cannot shrink the
    kernels to spikes, which is what keeps later proposals exploring.
    """

    def __init__(self, spec: ParamSpec, observations: list[float]):
        self.spec = spec
        self.lo, self.hi = spec.domain()
        self.mu = np.sort(np.asarray(observations, dtype=np.float64))
        m = len(self.mu)
        width = self.hi - self.lo
        if m:
            extended = np.r_[self.lo, self.mu, self.hi]
            gaps = np.maximum(self.mu - extended[:-2], extended[2:] - self.mu)
            floor = width / min(100.0, m + 1.0)
            self.sigma = np.clip(gaps, floor, width)
        else:
            self.sigma = np.empty(0)
        # Uniform weights over observations plus the prior component.
        self.n_components = m + 1

    def sample(self, rng: np.random.Generator) -> float:
        comp = int(rng.integers(self.n_components))
        if comp == len(self.mu):
            return float(rng.uniform(self.lo, self.hi))
        mu, sigma = self.mu[comp], self.sigma[comp]
        lo_cdf = float(ndtr((self.lo - mu) / sigma))
        hi_cdf = float(ndtr((self.hi - mu) / sigma))
        if hi_cdf <= lo_cdf:
            return float(np.clip(mu, self.lo, self.hi))
        u = rng.uniform(lo_cdf, hi_cdf)
        x = mu + sigma * float(ndtri(u))
        return float(np.clip(x, self.lo, self.hi))

    def log_density(self, x: float) -> float:
        width = self.hi - self.lo
        # Prior component first. For integers the domain width equals the
        # cell count, so 1/width doubles as the per-cell prior mass.
        total = 1.0 / width
        if len(self.mu):
            z = ndtr((self.hi - self.mu) / self.sigma) - ndtr(
                (self.lo - self.mu) / self.sigma
            )
            if self.spec.kind == INTEGER:
                k = round(x)
                upper = ndtr((k + 0.5 - self.mu) / self.sigma)
                lower = ndtr((k - 0.5 - self.mu) / self.sigma)
                total += ((upper - lower) / np.maximum(z, 1e-300)).sum()
            else:
                u = (x - self.mu) / self.sigma
                pdf = np.exp(-0.5 * u * u) / (math.sqrt(2 * math.pi) * self.sigma)
                total += (pdf / np.maximum(z, 1e-300)).sum()
        return math.log(total / self.n_components)


def _good_count(n: int) -> int:
    return max(1, min(math.ceil(0.25 * n), 25))


def tpe_suggest(space: SearchSpace, trials: list[TrialRecord], rng: np.random.Generator) -> dict:
    """Propose the next point given finished trials (lower objective = better).

    Deterministic in (space, trials, rng state): with fewer than
    ``N_STARTUP_TRIALS`` finished trials it falls back to the prior.
    """
    if len(trials) < N_STARTUP_TRIALS:
        return random_suggest(space, rng)
    ordered = sorted(trials, key=lambda t: (t.objective, t.number))
    n_good = _good_count(len(ordered))
    good, bad = ordered[:n_good], ordered[n_good:]
    out = {}
    for spec in space.params:
        good_obs = [spec.to_internal(t.params[spec.name]) for t in good]
        bad_obs = [spec.to_internal(t.params[spec.name]) for t in bad]
        good_mix = _Parzen(spec, good_obs)
        bad_mix = _Parzen(spec, bad_obs)
        best_x, best_score = None, -math.inf
        for _ in range(N_CANDIDATES):
            x = good_mix.sample(rng)
            if spec.kind == INTEGER:
                x = float(np.clip(round(x), spec.low, spec.high))
            score = good_mix.log_density(x) - bad_mix.log_density(x)
            if score > best_score:
                best_x, best_score = x, score
        out[spec.name] = spec.to_value(best_x)
    return out


# ---------------------------------------------------------------------------
# Objectives

def objective_performance(y_true, scores) -> float:
    """1 - AUC: zero for a perfect ranker, 0.5 for a random one."""
    return 1.0 - roc_auc(y_true, scores)


def objective_fairness(y_true, scores, groups, fairness_weight: float) -> float:
    """(1 - AUC) + lambda * demographic parity at the 0.5 threshold."""
    if groups is None:
        raise ValueError("fairness objective needs a group attribute")
    return (1.0 - roc_auc(y_true, scores)) + fairness_weight * demographic_parity(
        scores, groups
    )


# ---------------------------------------------------------------------------
# Study driver

_HYPERPARAM_NAMES = {
    "learning_rate",
    "max_bins",
    "max_leaves",
    "max_rounds",
    "interactions",
    "outer_bags",
    "inner_bags",
    "greedy_ratio",
}


def trial_hyperparams(params: dict, base: EbmHyperparams | None = None) -> EbmHyperparams:
    """Materialize trial parameters into model hyperparameters.

    Non-model entries (the fairness ``lambda``) are ignored; integers are
    coerced; anything unrecognized is an error.
    """
    base = base if base is not None else EbmHyperparams()
    changes = {}
    for name, value in params.items():
        if name == "lambda":
            continue
        if name not in _HYPERPARAM_NAMES:
            raise ValueError(f"unknown trial parameter {name!r}")
        if name in ("max_bins", "max_leaves", "max_rounds", "interactions",
                    "outer_bags", "inner_bags"):
            changes[name] = int(round(value))
        else:
            changes[name] = float(value)
    return base.updated(**changes)


def best_hyperparams(study: Study, base: EbmHyperparams | None = None) -> EbmHyperparams:
    return trial_hyperparams(study.best_trial.params, base)


def run_study(
    frame: TabularFrame,
    objective: str = "performance",
    n_trials: int = 50,
    seed: int = 0,
    space: SearchSpace | None = None,
    study_path=None,
    base_hyperparams: EbmHyperparams | None = None,
    eval_fraction: float = 0.2,
) -> Study:
    """Search hyperparameters on ``frame`` with an internal holdout.

    ``frame`` should be the training partition only; each trial fits on
    80% of it and scores the objective on the remaining 20% (a fixed,
    seeded split shared by all trials). With ``study_path`` every trial is
    persisted as it finishes and an interrupted study resumes where it
    stopped, producing the same trials as an uninterrupted run.
    """
    if objective not in ("performance", "fairness"):
        raise ValueError(f"unknown objective {objective!r}")
    if objective == "fairness" and frame.sensitive is None:
        raise ValueError("fairness objective needs a frame with a sensitive column")
    space = space if space is not None else default_space(objective)

    study = Study(space=space, objective_kind=objective, seed=seed)
    if study_path is not None and os.path.exists(study_path):
        study = load_study(study_path)
        if study.objective_kind != objective or study.seed != seed:
            raise ValueError("existing study was run with a different setup")
        if study.space.to_payload() != space.to_payload():
            raise ValueError("existing study used a different search space")

    fit_idx, eval_idx = stratified_splits(frame, SplitSpec(eval_fraction, 1, seed))[0]
    fit_frame = frame.subset(fit_idx)
    eval_frame = frame.subset(eval_idx)

    while len(study.trials) < n_trials:
        number = len(study.trials)
        params = tpe_suggest(space, study.trials, stream(seed, "tpe", number))
        hp = trial_hyperparams(params, base_hyperparams)
        started = time.perf_counter()
        model = fit(fit_frame, hp)
        scores = predict_proba(model, eval_frame)
        attrs = {"roc_auc": roc_auc(eval_frame.target, scores)}
        if eval_frame.sensitive is not None:
            attrs["demographic_parity"] = demographic_parity(
                scores, eval_frame.sensitive
            )
        if objective == "fairness":
            value = objective_fairness(
                eval_frame.target, scores, eval_frame.sensitive, params["lambda"]
            )
            attrs["fairness_weight"] = params["lambda"]
        else:
            value = objective_performance(eval_frame.target, scores)
        study.trials.append(
            TrialRecord(
                number=number,
                params=params,
                objective=float(value),
                attrs=attrs,
                timing={"fit_seconds": time.perf_counter() - started},
            )
        )
        if study_path is not None:
            save_study(study, study_path)
    return study
