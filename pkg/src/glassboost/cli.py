"""Command-line interface.

Every subcommand is a thin wrapper over a plain function (``cmd_train``,
``cmd_tune``, ``cmd_pretrain``, ``cmd_benchmark``, ...) that takes a
loaded frame and returns the report dict it wrote, so the same entry
points are scriptable without a shell.

Exit codes: 0 success, 2 usage, 3 file I/O, 4 unusable data, 5 bad
configuration.
"""

from __future__ import annotations

import functools
import json
import os
import time

import click
import numpy as np

from .dataio import (
    DatasetError,
    SplitSpec,
    TabularFrame,
    load_csv,
    save_split_manifest,
    stratified_label_subset,
    stratified_splits,
    write_csv,
)
from .ebm import (
    EbmHyperparams,
    fit,
    load_model,
    model_digest,
    predict_proba,
    save_model,
)
from .explain import explain_global, explain_local, export_shape_function, term_rank
from .hpo import SearchSpace, best_hyperparams, run_study
from .metrics import evaluate_predictions
from .pretrain import AutoencoderConfig, build_init_pipeline, load_pipeline, save_pipeline
from .serialize import write_json
from .validate import (
    RunConfiguration,
    matrix_markdown,
    perturbation_sensitivity,
    run_matrix,
)

EXIT_IO = 3
EXIT_DATA = 4
EXIT_CONFIG = 5


class CliError(click.ClickException):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except DatasetError as exc:
            raise CliError(f"data error: {exc}", EXIT_DATA) from exc
        except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
            raise CliError(f"i/o error: {exc}", EXIT_IO) from exc
        except json.JSONDecodeError as exc:
            raise CliError(f"config error: {exc}", EXIT_CONFIG) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"config error: {exc}", EXIT_CONFIG) from exc

    return wrapper


# ---------------------------------------------------------------------------
# Core operations (plain functions; the click layer only parses arguments)

def _echo(quiet: bool, message: str) -> None:
    if not quiet:
        click.echo(message)


def _summary_stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def _maybe_subsample(frame: TabularFrame, n: int | None, seed: int):
    if n is None or n >= frame.n_rows:
        return frame, None
    rows = stratified_label_subset(frame, n, seed, tag="subsample")
    return frame.subset(rows), int(n)


def cmd_train(
    frame: TabularFrame,
    seed: int,
    out_dir: str,
    test_fraction: float = 0.25,
    n_repeats: int = 3,
    hyperparams: EbmHyperparams | None = None,
    init_pipeline=None,
    subsample: int | None = None,
    quiet: bool = True,
    dataset_label: str = "",
) -> dict:
    """Repeated stratified train/test evaluation with fixed hyperparameters.

    Writes one model per repeat plus ``report.json`` under ``out_dir``;
    returns the report. Rerunning with identical inputs reproduces every
    payload byte for byte (timing sections aside).
    """
    started = time.perf_counter()
    hp = hyperparams if hyperparams is not None else EbmHyperparams(random_state=seed)
    frame, subsample = _maybe_subsample(frame, subsample, seed)
    splits = stratified_splits(frame, SplitSpec(test_fraction, n_repeats, seed))
    os.makedirs(out_dir, exist_ok=True)

    init_full = None
    if init_pipeline is not None:
        init_full = init_pipeline.init_scores(frame.values)

    repeats = []
    for r, (train_idx, test_idx) in enumerate(splits):
        train = frame.subset(train_idx)
        test = frame.subset(test_idx)
        fit_started = time.perf_counter()
        model = fit(
            train,
            hp,
            init_scores=None if init_full is None else init_full[train_idx],
        )
        fit_seconds = time.perf_counter() - fit_started
        scores = predict_proba(
            model, test, init_scores=None if init_full is None else init_full[test_idx]
        )
        metrics = evaluate_predictions(test.target, scores, groups=test.sensitive)
        model_path = os.path.join(out_dir, f"model_repeat{r}.json")
        save_model(model, model_path)
        repeats.append(
            {
                "repeat": r,
                "n_train": int(len(train_idx)),
                "n_test": int(len(test_idx)),
                "model_file": os.path.basename(model_path),
                "model_digest": model_digest(model),
                "metrics": metrics,
                "timing": {"fit_seconds": fit_seconds},
            }
        )
        _echo(quiet, f"repeat {r}: test AUC {metrics['roc_auc']:.5f}")

    summary = {
        "roc_auc": _summary_stats([e["metrics"]["roc_auc"] for e in repeats]),
        "f1": _summary_stats([e["metrics"]["f1"] for e in repeats]),
    }
    if frame.sensitive is not None:
        summary["demographic_parity"] = _summary_stats(
            [e["metrics"]["demographic_parity"] for e in repeats]
        )
    report = {
        "command": "train",
        "dataset": {
            "label": dataset_label,
            "n_rows": int(frame.n_rows),
            "n_features": len(frame.columns),
            "positive_rate": float(frame.target.mean()),
            "subsample": subsample,
        },
        "seed": seed,
        "test_fraction": test_fraction,
        "n_repeats": n_repeats,
        "hyperparams": hp.to_dict(),
        "used_init_scores": init_full is not None,
        "repeats": repeats,
        "summary": summary,
        "timing": {"total_seconds": time.perf_counter() - started},
    }
    write_json(os.path.join(out_dir, "report.json"), report)
    _echo(
        quiet,
        f"test AUC {summary['roc_auc']['mean']:.5f} "
        f"+- {summary['roc_auc']['std']:.5f} over {n_repeats} repeats",
    )
    return report


def cmd_tune(
    frame: TabularFrame,
    seed: int,
    out_dir: str,
    objective: str = "performance",
    n_trials: int = 50,
    test_fraction: float = 0.25,
    base_hyperparams: EbmHyperparams | None = None,
    space: SearchSpace | None = None,
    subsample: int | None = None,
    quiet: bool = True,
    dataset_label: str = "",
) -> dict:
    """Hyperparameter study on the training split, then refit and test.

    The study runs on the first repeat's training partition with its own
    internal holdout; the chosen configuration is refitted on that whole
    partition and scored on the untouched test partition. ``space``
    narrows the search domain for callers embedding the study in a larger
    budget. With the fairness objective the report also tracks the
    demographic parity gap and the importance rank of the sensitive
    feature against a default-configuration baseline on the same split.
    """
    started = time.perf_counter()
    frame, subsample = _maybe_subsample(frame, subsample, seed)
    if objective == "fairness" and frame.sensitive is None:
        raise ValueError("fairness tuning needs --sensitive")
    train_idx, test_idx = stratified_splits(frame, SplitSpec(test_fraction, 1, seed))[0]
    train = frame.subset(train_idx)
    test = frame.subset(test_idx)
    os.makedirs(out_dir, exist_ok=True)

    study_path = os.path.join(out_dir, f"study_{objective}.json")
    study = run_study(
        train,
        objective=objective,
        n_trials=n_trials,
        seed=seed,
        space=space,
        study_path=study_path,
        base_hyperparams=base_hyperparams,
    )
    best = study.best_trial
    hp = best_hyperparams(study, base_hyperparams)
    write_json(os.path.join(out_dir, "best_hyperparams.json"), hp.to_dict())

    model = fit(train, hp)
    scores = predict_proba(model, test)
    metrics = evaluate_predictions(test.target, scores, groups=test.sensitive)
    save_model(model, os.path.join(out_dir, "tuned_model.json"))

    report = {
        "command": "tune",
        "dataset": {
            "label": dataset_label,
            "n_rows": int(frame.n_rows),
            "n_features": len(frame.columns),
            "subsample": subsample,
        },
        "seed": seed,
        "objective": objective,
        "n_trials": n_trials,
        "test_fraction": test_fraction,
        "best_trial": {
            "number": best.number,
            "params": best.params,
            "objective": best.objective,
            "attrs": best.attrs,
        },
        "hyperparams": hp.to_dict(),
        "test_metrics": metrics,
        "timing": {"total_seconds": time.perf_counter() - started},
    }

    if frame.sensitive is not None:
        sensitive_name = _sensitive_feature_name(frame)
        baseline_hp = (
            base_hyperparams
            if base_hyperparams is not None
            else EbmHyperparams(random_state=seed)
        )
        baseline = fit(train, baseline_hp)
        baseline_scores = predict_proba(baseline, test)
        baseline_metrics = evaluate_predictions(
            test.target, baseline_scores, groups=test.sensitive
        )
        report["baseline"] = {
            "hyperparams": baseline_hp.to_dict(),
            "test_metrics": baseline_metrics,
        }
        if sensitive_name is not None:
            report["sensitive_feature"] = sensitive_name
            report["sensitive_rank_baseline"] = term_rank(baseline, sensitive_name)
            report["sensitive_rank_tuned"] = term_rank(model, sensitive_name)

    write_json(os.path.join(out_dir, "report.json"), report)
    _echo(
        quiet,
        f"best objective {best.objective:.5f} (trial {best.number}); "
        f"test AUC {metrics['roc_auc']:.5f}",
    )
    return report


def _sensitive_feature_name(frame: TabularFrame) -> str | None:
    """The feature column matching the sensitive attribute, if any."""
    if frame.sensitive is None:
        return None
    sens = np.array([str(v) for v in frame.sensitive], dtype=object)
    for j, schema in enumerate(frame.columns):
        column = frame.values[:, j]
        if schema.kind == "categorical":
            labels = np.array(
                [
                    "" if np.isnan(v) else schema.categories[int(v)]
                    for v in column
                ],
                dtype=object,
            )
            if (labels == sens).all():
                return schema.name
        else:
            with np.errstate(invalid="ignore"):
                try:
                    as_float = np.array([float(s) for s in sens])
                except ValueError:
                    continue
            if np.array_equal(as_float, column, equal_nan=True):
                return schema.name
    return None


def cmd_pretrain(
    frame: TabularFrame,
    seed: int,
    out_dir: str,
    n_labels: int | None = None,
    labeled_fraction: float = 0.1,
    test_fraction: float = 0.25,
    autoencoder: AutoencoderConfig | None = None,
    l2: float = 1e-2,
    train_only: bool = False,
    quiet: bool = True,
    dataset_label: str = "",
) -> dict:
    """Fit the warm-start pipeline and export per-row initial scores.

    The autoencoder trains on feature rows only (all rows by default;
    ``train_only`` restricts it to the first repeat's training
    partition); the logistic head sees just the labeled subset drawn from
    the training partition. Writes ``pipeline.json`` and an init-score
    table covering every row.
    """
    started = time.perf_counter()
    config = autoencoder if autoencoder is not None else AutoencoderConfig(seed=seed)
    train_idx, test_idx = stratified_splits(frame, SplitSpec(test_fraction, 1, seed))[0]
    train = frame.subset(train_idx)
    if n_labels is None:
        n_labels = max(2, int(round(labeled_fraction * len(train_idx))))
    labeled_local = stratified_label_subset(train, n_labels, seed)
    labeled = train_idx[labeled_local]
    os.makedirs(out_dir, exist_ok=True)

    if train_only:
        pipeline = build_init_pipeline(train, labeled_local, config, l2=l2)
    else:
        pipeline = build_init_pipeline(frame, labeled, config, l2=l2)
    save_pipeline(pipeline, os.path.join(out_dir, "pipeline.json"))

    init_scores = pipeline.init_scores(frame.values)
    in_test = np.zeros(frame.n_rows, dtype=bool)
    in_test[test_idx] = True
    lines = ["row,partition,init_score"]
    for i in range(frame.n_rows):
        part = "test" if in_test[i] else "train"
        lines.append(f"{i},{part},{init_scores[i]!r}")
    with open(os.path.join(out_dir, "init_scores.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    history = pipeline.loss_history
    report = {
        "command": "pretrain",
        "dataset": {"label": dataset_label, "n_rows": int(frame.n_rows)},
        "seed": seed,
        "n_labels": int(n_labels),
        "train_only": bool(train_only),
        "autoencoder": config.to_payload(),
        "reconstruction_loss": {"first": history[0], "last": history[-1]},
        "head": {
            "n_iterations": pipeline.head.n_iterations,
            "grad_norm": pipeline.head.grad_norm,
        },
        "init_scores": {
            "mean": float(init_scores.mean()),
            "std": float(init_scores.std()),
        },
        "timing": {"total_seconds": time.perf_counter() - started},
    }
    write_json(os.path.join(out_dir, "report.json"), report)
    _echo(
        quiet,
        f"reconstruction loss {history[0]:.5f} -> {history[-1]:.5f}; "
        f"head converged in {pipeline.head.n_iterations} iterations",
    )
    return report


def cmd_benchmark(
    frame: TabularFrame,
    seed: int,
    out_dir: str,
    n_repeats: int = 3,
    test_fraction: float = 0.25,
    n_trials: int = 50,
    subsample: int | None = None,
    include_fairness: bool | None = None,
    dry_run: bool = False,
    quiet: bool = True,
    dataset_label: str = "",
) -> dict:
    """Full comparison: baseline, tuned, fairness-tuned and warm starts.

    Studies run once on the first repeat's training partition; every
    configuration is then evaluated over the shared repeated splits with
    paired significance tests against the baseline. ``dry_run`` prints
    the plan without fitting anything.
    """
    started = time.perf_counter()
    frame, subsample = _maybe_subsample(frame, subsample, seed)
    if include_fairness is None:
        include_fairness = frame.sensitive is not None
    if include_fairness and frame.sensitive is None:
        raise ValueError("fairness benchmarking needs --sensitive")

    plan = ["baseline", "tuned", "warm", "warm-tuned"]
    if include_fairness:
        plan.insert(2, "fair")
    if dry_run:
        _echo(
            quiet,
            "plan: "
            + ", ".join(plan)
            + f"; {n_repeats} repeats, {n_trials} trials per study, "
            + f"{frame.n_rows} rows",
        )
        return {"command": "benchmark", "dry_run": True, "plan": plan}

    os.makedirs(out_dir, exist_ok=True)
    train_idx, _ = stratified_splits(frame, SplitSpec(test_fraction, 1, seed))[0]
    train = frame.subset(train_idx)

    perf_study = run_study(
        train,
        objective="performance",
        n_trials=n_trials,
        seed=seed,
        study_path=os.path.join(out_dir, "study_performance.json"),
    )
    tuned_hp = best_hyperparams(perf_study)
    studies = {"performance": perf_study.best_trial.objective}

    fair_hp = None
    if include_fairness:
        fair_study = run_study(
            train,
            objective="fairness",
            n_trials=n_trials,
            seed=seed,
            study_path=os.path.join(out_dir, "study_fairness.json"),
        )
        fair_hp = best_hyperparams(fair_study)
        studies["fairness"] = fair_study.best_trial.objective

    base_hp = EbmHyperparams(random_state=seed)
    ae_config = AutoencoderConfig(seed=seed)
    configurations = [
        RunConfiguration("baseline", base_hp),
        RunConfiguration("tuned", tuned_hp),
    ]
    if fair_hp is not None:
        configurations.append(RunConfiguration("fair", fair_hp))
    configurations.append(
        RunConfiguration(
            "warm", base_hp, use_init=True, labeled_fraction=1.0, autoencoder=ae_config
        )
    )
    configurations.append(
        RunConfiguration(
            "warm-tuned",
            tuned_hp,
            use_init=True,
            labeled_fraction=1.0,
            autoencoder=ae_config,
        )
    )

    matrix = run_matrix(frame, configurations, SplitSpec(test_fraction, n_repeats, seed))
    report = {
        "command": "benchmark",
        "dataset": {
            "label": dataset_label,
            "n_rows": int(frame.n_rows),
            "subsample": subsample,
        },
        "seed": seed,
        "n_trials": n_trials,
        "study_best_objectives": studies,
        "matrix": matrix,
        "timing": {"total_seconds": time.perf_counter() - started},
    }
    write_json(os.path.join(out_dir, "benchmark.json"), report)
    _echo(quiet, matrix_markdown(matrix))
    return report


# ---------------------------------------------------------------------------
# Click layer

def _config_section(ctx, name: str) -> dict:
    config = (ctx.obj or {}).get("config") or {}
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise CliError(f"config section {name!r} must be an object", EXIT_CONFIG)
    return section


def _resolve(ctx, command: str, **values) -> dict:
    """Apply config-file defaults to options the user did not pass."""
    section = _config_section(ctx, command)
    unknown = set(section) - set(values)
    if unknown:
        raise CliError(
            f"config section {command!r} has unknown keys {sorted(unknown)}",
            EXIT_CONFIG,
        )
    out = {}
    for name, value in values.items():
        source = ctx.get_parameter_source(name)
        if name in section and source == click.core.ParameterSource.DEFAULT:
            out[name] = section[name]
        else:
            out[name] = value
    return out


def _data_options(fn):
    fn = click.option("--input", "input_path", required=True, help="CSV file to load.")(fn)
    fn = click.option("--target", "target_column", required=True, help="Target column name.")(fn)
    fn = click.option("--sensitive", "sensitive_column", default=None,
                      help="Sensitive attribute column for fairness metrics.")(fn)
    fn = click.option("--numeric", "numeric_columns", multiple=True,
                      help="Force a column to be treated as numeric.")(fn)
    fn = click.option("--categorical", "categorical_columns", multiple=True,
                      help="Force a column to be treated as categorical.")(fn)
    fn = click.option("--positive-label", default=None,
                      help="Raw target value to treat as the positive class.")(fn)
    fn = click.option("--target-map", default=None,
                      help="JSON object mapping raw target values to 0/1.")(fn)
    return fn


def _load_input(input_path, target_column, sensitive_column, numeric_columns,
                categorical_columns, positive_label, target_map) -> TabularFrame:
    overrides: dict = {}
    for name in numeric_columns:
        overrides[name] = "numeric"
    for name in categorical_columns:
        overrides[name] = "categorical"
    if target_map is not None:
        overrides[target_column] = json.loads(target_map)
    elif positive_label is not None:
        overrides[target_column] = positive_label
    if not os.path.exists(input_path):
        raise CliError(f"i/o error: no such file: {input_path}", EXIT_IO)
    return load_csv(
        input_path,
        target_column,
        sensitive_column=sensitive_column,
        schema_overrides=overrides or None,
    )


def _hp_options(fn):
    names = [
        ("--learning-rate", "learning_rate", float),
        ("--max-bins", "max_bins", int),
        ("--max-leaves", "max_leaves", int),
        ("--max-rounds", "max_rounds", int),
        ("--interactions", "interactions", int),
        ("--outer-bags", "outer_bags", int),
        ("--inner-bags", "inner_bags", int),
        ("--greedy-ratio", "greedy_ratio", float),
        ("--validation-fraction", "validation_fraction", float),
        ("--patience", "early_stopping_patience", int),
    ]
    for flag, name, kind in reversed(names):
        fn = click.option(flag, name, type=kind, default=None,
                          help=f"Override the {name} hyperparameter.")(fn)
    return fn


def _build_hyperparams(seed: int, section: dict, **overrides) -> EbmHyperparams:
    hp = EbmHyperparams(random_state=seed)
    merged = {k: v for k, v in section.items()}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if merged:
        hp = hp.updated(**merged)
    return hp


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=int, default=1337, show_default=True,
              help="Seed for every random stream.")
@click.option("--config", "config_path", default=None,
              help="JSON file with per-command option defaults.")
@click.option("--out-dir", default="runs", show_default=True,
              help="Directory for reports, models and studies.")
@click.option("--quiet", is_flag=True, help="Suppress progress output.")
@click.pass_context
@_guarded
def main(ctx, seed, config_path, out_dir, quiet):
    """Glassbox boosted additive models: train, tune, explain, validate."""
    config = {}
    if config_path is not None:
        if not os.path.exists(config_path):
            raise CliError(f"i/o error: no such file: {config_path}", EXIT_IO)
        with open(config_path, encoding="utf-8") as fh:
            try:
                config = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CliError(f"config error: {exc}", EXIT_CONFIG) from exc
        if not isinstance(config, dict):
            raise CliError("config file must hold a JSON object", EXIT_CONFIG)
    if ctx.get_parameter_source("seed") == click.core.ParameterSource.DEFAULT:
        seed = int(config.get("seed", seed))
    if ctx.get_parameter_source("out_dir") == click.core.ParameterSource.DEFAULT:
        out_dir = config.get("out_dir", out_dir)
    ctx.obj = {"seed": seed, "out_dir": out_dir, "quiet": quiet, "config": config}


@main.command()
@_data_options
@click.option("--output", "output_path", default=None,
              help="Destination CSV (default: <out-dir>/ingested.csv).")
@click.pass_context
@_guarded
def ingest(ctx, input_path, target_column, sensitive_column, numeric_columns,
           categorical_columns, positive_label, target_map, output_path):
    """Parse a raw CSV and write it back in canonical form.

    Canonical means: 0/1 targets, empty-string missing cells and a
    schema summary JSON next to the output.
    """
    obj = ctx.obj
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    output_path = output_path or os.path.join(obj["out_dir"], "ingested.csv")
    os.makedirs(os.path.dirname(os.path.abspath(output_path)), exist_ok=True)
    write_csv(frame, output_path, target_column=target_column)
    schema = {
        "n_rows": int(frame.n_rows),
        "positive_rate": float(frame.target.mean()),
        "columns": [
            {
                "name": c.name,
                "kind": c.kind,
                "n_categories": len(c.categories),
                "missing": int(c.missing_count),
            }
            for c in frame.columns
        ],
    }
    write_json(output_path + ".schema.json", schema)
    _echo(obj["quiet"], f"wrote {frame.n_rows} rows to {output_path}")


@main.command()
@_data_options
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--repeats", "n_repeats", type=int, default=3, show_default=True)
@click.option("--output", "output_path", default=None,
              help="Destination JSON (default: <out-dir>/splits.json).")
@click.pass_context
@_guarded
def split(ctx, input_path, target_column, sensitive_column, numeric_columns,
          categorical_columns, positive_label, target_map, test_fraction,
          n_repeats, output_path):
    """Write a reproducible stratified split manifest."""
    obj = ctx.obj
    opts = _resolve(ctx, "split", test_fraction=test_fraction, n_repeats=n_repeats)
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    splits = stratified_splits(
        frame, SplitSpec(opts["test_fraction"], opts["n_repeats"], obj["seed"])
    )
    output_path = output_path or os.path.join(obj["out_dir"], "splits.json")
    os.makedirs(os.path.dirname(os.path.abspath(output_path)), exist_ok=True)
    save_split_manifest(splits, output_path)
    _echo(obj["quiet"], f"wrote {len(splits)} splits to {output_path}")


@main.command()
@_data_options
@_hp_options
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--repeats", "n_repeats", type=int, default=3, show_default=True)
@click.option("--subsample", type=int, default=None,
              help="Stratified row cap applied before splitting.")
@click.option("--init", "init_path", default=None,
              help="Warm-start pipeline JSON from the pretrain command.")
@click.pass_context
@_guarded
def train(ctx, input_path, target_column, sensitive_column, numeric_columns,
          categorical_columns, positive_label, target_map, test_fraction,
          n_repeats, subsample, init_path, **hp_overrides):
    """Train with fixed hyperparameters over repeated splits."""
    obj = ctx.obj
    opts = _resolve(ctx, "train", test_fraction=test_fraction,
                    n_repeats=n_repeats, subsample=subsample)
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    hp = _build_hyperparams(obj["seed"], _config_section(ctx, "hyperparams"),
                            **hp_overrides)
    init_pipeline = load_pipeline(init_path) if init_path else None
    cmd_train(
        frame,
        seed=obj["seed"],
        out_dir=os.path.join(obj["out_dir"], "train"),
        test_fraction=opts["test_fraction"],
        n_repeats=opts["n_repeats"],
        hyperparams=hp,
        init_pipeline=init_pipeline,
        subsample=opts["subsample"],
        quiet=obj["quiet"],
        dataset_label=os.path.basename(input_path),
    )


@main.command()
@_data_options
@click.option("--objective", type=click.Choice(["performance", "fairness"]),
              default="performance", show_default=True)
@click.option("--trials", "n_trials", type=int, default=50, show_default=True)
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--subsample", type=int, default=None)
@click.pass_context
@_guarded
def tune(ctx, input_path, target_column, sensitive_column, numeric_columns,
         categorical_columns, positive_label, target_map, objective, n_trials,
         test_fraction, subsample):
    """Run a hyperparameter study, refit the best setup and test it."""
    obj = ctx.obj
    opts = _resolve(ctx, "tune", objective=objective, n_trials=n_trials,
                    test_fraction=test_fraction, subsample=subsample)
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    cmd_tune(
        frame,
        seed=obj["seed"],
        out_dir=os.path.join(obj["out_dir"], f"tune_{opts['objective']}"),
        objective=opts["objective"],
        n_trials=opts["n_trials"],
        test_fraction=opts["test_fraction"],
        subsample=opts["subsample"],
        quiet=obj["quiet"],
        dataset_label=os.path.basename(input_path),
    )


@main.command()
@_data_options
@click.option("--labels", "n_labels", type=int, default=None,
              help="Labeled rows for the head (default: 10% of training rows).")
@click.option("--labeled-fraction", type=float, default=0.1, show_default=True)
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--hidden", type=int, default=None)
@click.option("--bottleneck", type=int, default=None)
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--ae-learning-rate", type=float, default=1e-3, show_default=True)
@click.option("--l2", type=float, default=1e-2, show_default=True)
@click.option("--train-only", is_flag=True,
              help="Pretrain on the training partition only, not all rows.")
@click.pass_context
@_guarded
def pretrain(ctx, input_path, target_column, sensitive_column, numeric_columns,
             categorical_columns, positive_label, target_map, n_labels,
             labeled_fraction, test_fraction, hidden, bottleneck, epochs,
             batch_size, ae_learning_rate, l2, train_only):
    """Fit the autoencoder warm-start pipeline and export init scores."""
    obj = ctx.obj
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    config = AutoencoderConfig(
        hidden=hidden,
        bottleneck=bottleneck,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=ae_learning_rate,
        seed=obj["seed"],
    )
    cmd_pretrain(
        frame,
        seed=obj["seed"],
        out_dir=os.path.join(obj["out_dir"], "pretrain"),
        n_labels=n_labels,
        labeled_fraction=labeled_fraction,
        test_fraction=test_fraction,
        autoencoder=config,
        l2=l2,
        train_only=train_only,
        quiet=obj["quiet"],
        dataset_label=os.path.basename(input_path),
    )


@main.command()
@_data_options
@click.option("--model", "model_path", required=True, help="Model JSON to evaluate.")
@click.option("--init", "init_path", default=None,
              help="Warm-start pipeline used when the model was trained.")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.pass_context
@_guarded
def evaluate(ctx, input_path, target_column, sensitive_column, numeric_columns,
             categorical_columns, positive_label, target_map, model_path,
             init_path, threshold):
    """Score a saved model on a CSV and report metrics."""
    obj = ctx.obj
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    if not os.path.exists(model_path):
        raise CliError(f"i/o error: no such file: {model_path}", EXIT_IO)
    model = load_model(model_path)
    init_scores = None
    if init_path:
        init_scores = load_pipeline(init_path).init_scores(frame.values)
    scores = predict_proba(model, frame, init_scores=init_scores)
    metrics = evaluate_predictions(
        frame.target, scores, groups=frame.sensitive, threshold=threshold
    )
    out_path = os.path.join(obj["out_dir"], "evaluation.json")
    write_json(out_path, {"command": "evaluate", "model": os.path.basename(model_path),
                          "metrics": metrics})
    _echo(obj["quiet"],
          f"AUC {metrics['roc_auc']:.5f}  F1 {metrics['f1']:.5f}")


@main.command("explain")
@click.option("--model", "model_path", required=True, help="Model JSON to inspect.")
@click.option("--feature", default=None, help="Export this feature's shape function.")
@click.option("--input", "input_path", default=None,
              help="CSV with rows to explain locally.")
@click.option("--target", "target_column", default=None,
              help="Target column of --input (needed to parse it).")
@click.option("--row", type=int, default=None, help="Row index to explain locally.")
@click.pass_context
@_guarded
def explain_cmd(ctx, model_path, feature, input_path, target_column, row):
    """Write global term importances; optionally shapes or row breakdowns."""
    obj = ctx.obj
    if not os.path.exists(model_path):
        raise CliError(f"i/o error: no such file: {model_path}", EXIT_IO)
    model = load_model(model_path)
    os.makedirs(obj["out_dir"], exist_ok=True)
    overview = explain_global(model)
    write_json(os.path.join(obj["out_dir"], "explain_global.json"), overview)
    top = overview["terms"][:5]
    _echo(obj["quiet"], "top terms: " + ", ".join(
        f"{t['name']} ({t['importance']:.4f})" for t in top))
    if feature is not None:
        doc = export_shape_function(
            model, feature, os.path.join(obj["out_dir"], f"shape_{feature}.json")
        )
        _echo(obj["quiet"], f"wrote shape function with {len(doc['bins'])} bins")
    if input_path is not None:
        if row is None or target_column is None:
            raise CliError("local explanations need --target and --row", EXIT_CONFIG)
        frame = _load_input(input_path, target_column, None, (), (), None, None)
        if not 0 <= row < frame.n_rows:
            raise CliError(f"row {row} out of range", EXIT_CONFIG)
        local = explain_local(model, frame.values[row : row + 1])[0]
        write_json(os.path.join(obj["out_dir"], f"explain_row{row}.json"), local)
        _echo(obj["quiet"],
              f"row {row}: probability {local['probability']:.5f}")


@main.command("validate")
@_data_options
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--repeats", "n_repeats", type=int, default=5, show_default=True)
@click.option("--labels", "n_labels", type=int, default=None,
              help="Labeled rows for the warm-start configuration.")
@click.option("--noise-scale", type=float, default=0.1, show_default=True)
@click.option("--draws", "n_draws", type=int, default=20, show_default=True)
@click.pass_context
@_guarded
def validate_cmd(ctx, input_path, target_column, sensitive_column, numeric_columns,
                 categorical_columns, positive_label, target_map, test_fraction,
                 n_repeats, n_labels, noise_scale, n_draws):
    """Compare cold vs warm training over repeats; probe noise stability."""
    obj = ctx.obj
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    seed = obj["seed"]
    hp = EbmHyperparams(random_state=seed)
    configurations = [
        RunConfiguration("baseline", hp),
        RunConfiguration(
            "warm",
            hp,
            use_init=True,
            n_labels=n_labels,
            labeled_fraction=0.1,
            autoencoder=AutoencoderConfig(seed=seed),
        ),
    ]
    matrix = run_matrix(frame, configurations, SplitSpec(test_fraction, n_repeats, seed))

    train_idx, _ = stratified_splits(frame, SplitSpec(test_fraction, 1, seed))[0]
    model = fit(frame.subset(train_idx), hp)
    sensitivity = perturbation_sensitivity(
        model, frame, noise_scale=noise_scale, n_draws=n_draws, seed=seed
    )
    report = {
        "command": "validate",
        "matrix": matrix,
        "perturbation": sensitivity,
    }
    out_path = os.path.join(obj["out_dir"], "validation.json")
    write_json(out_path, report)
    _echo(obj["quiet"], matrix_markdown(matrix))
    _echo(obj["quiet"],
          f"perturbation: mean |dp| {sensitivity['mean_abs_delta']:.5f}, "
          f"flip rate {sensitivity['flip_rate']:.5f}")


@main.command()
@_data_options
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--repeats", "n_repeats", type=int, default=3, show_default=True)
@click.option("--trials", "n_trials", type=int, default=50, show_default=True)
@click.option("--subsample", type=int, default=None)
@click.option("--dry-run", is_flag=True, help="Print the plan and exit.")
@click.pass_context
@_guarded
def benchmark(ctx, input_path, target_column, sensitive_column, numeric_columns,
              categorical_columns, positive_label, target_map, test_fraction,
              n_repeats, n_trials, subsample, dry_run):
    """Run the full comparison matrix with tuning and warm starts."""
    obj = ctx.obj
    opts = _resolve(ctx, "benchmark", test_fraction=test_fraction,
                    n_repeats=n_repeats, n_trials=n_trials, subsample=subsample)
    frame = _load_input(input_path, target_column, sensitive_column, numeric_columns,
                        categorical_columns, positive_label, target_map)
    cmd_benchmark(
        frame,
        seed=obj["seed"],
        out_dir=os.path.join(obj["out_dir"], "benchmark"),
        n_repeats=opts["n_repeats"],
        test_fraction=opts["test_fraction"],
        n_trials=opts["n_trials"],
        subsample=opts["subsample"],
        dry_run=dry_run,
        quiet=obj["quiet"],
        dataset_label=os.path.basename(input_path),
    )


if __name__ == "__main__":
    main()
