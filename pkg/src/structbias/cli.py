"""Command-line interface: generate, train, detect, compare, explain, benchmark.

Every command is deterministic given ``--seed``, writes machine-readable
(schema-validated) reports, and fails with a JSON error record on stderr plus
a stable nonzero exit code drawn from the error taxonomy.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classes import CLASS_ORDER, BiasClass
from .datasets import (
    DatasetSpec,
    build_dataset,
    load_dataset,
    save_dataset,
    save_portfolio,
)
from .errors import MissingResourceError, StructBiasError, ValidationError
from .explain import BackgroundSet, save_attribution_table, shapley_attribute
from .nn.model_io import load_model, save_model
from .nn.network import NetworkConfig, forward_batch, predict_matrix, preprocess
from .nn.training import TrainConfig, history_to_table, train
from .optimizers import RunBudget, collect, reference_portfolio
from .positions import load_positions, save_positions
from .reports import (
    REPORT_SCHEMA_VERSION,
    ComparisonRecord,
    ExperimentSummary,
    SummaryCell,
    build_detect_report,
    validate_report,
)
from .scenarios import ScenarioSpec, enumerate_portfolio, generate
from .seeding import derive_seed, rng_for
from .stats import detect_bias_statistical
from .svgplot import (
    render_attribution,
    render_comparison_summary,
    render_probability_heatmap,
)

MANIFEST_VERSION = 1


def _write_json(document: dict, path) -> None:
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


def _int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise ValidationError(f"{flag} expects a comma-separated integer list") from exc
    if not values:
        raise ValidationError(f"{flag} must name at least one value")
    return values


def _parse_class(name: str) -> BiasClass:
    try:
        return BiasClass(name)
    except ValueError:
        valid = ", ".join(c.value for c in CLASS_ORDER)
        raise ValidationError(
            f"unknown bias class {name!r}; valid classes: {valid}"
        ) from None


# --------------------------------------------------------------------------
# generate
# --------------------------------------------------------------------------

def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    portfolio = enumerate_portfolio(args.sample_size)
    if args.scenarios:
        wanted = set(args.scenarios.split(","))
        known = {spec.scenario_id for spec in portfolio}
        unknown = wanted - known
        if unknown:
            raise ValidationError(
                f"unknown scenario ids {sorted(unknown)}; known: {sorted(known)}"
            )
        portfolio = [spec for spec in portfolio if spec.scenario_id in wanted]

    per_class = {}
    for label in CLASS_ORDER:
        has_specs = any(spec.class_label is label for spec in portfolio)
        if not has_specs:
            continue
        if label is BiasClass.UNIFORM:
            per_class[label] = (
                args.uniform_count
                if args.uniform_count is not None
                else 4 * args.per_bias_class
            )
        else:
            per_class[label] = args.per_bias_class
    spec = DatasetSpec(per_class_counts=per_class, sample_size=args.sample_size,
                       train_fraction=args.train_fraction, master_seed=args.seed)
    train_set, validation_set = build_dataset(spec, portfolio)

    save_dataset(train_set, out / "train.csv")
    save_dataset(validation_set, out / "validation.csv")
    save_portfolio(portfolio, out / "portfolio.json")
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "dataset_spec": spec.to_record(),
        "files": {"train": "train.csv", "validation": "validation.csv",
                  "portfolio": "portfolio.json"},
        "train_counts": {label.value: count
                         for label, count in sorted(train_set.class_counts().items())},
        "validation_counts": {label.value: count
                              for label, count in sorted(validation_set.class_counts().items())},
    }
    _write_json(manifest, out / "manifest.json")
    print(f"wrote {len(train_set)} train / {len(validation_set)} validation samples to {out}")
    return 0


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    data = Path(args.data)
    train_path, validation_path = data / "train.csv", data / "validation.csv"
    for required in (train_path, validation_path):
        if not required.exists():
            raise MissingResourceError(f"dataset file not found: {required}")
    train_set = load_dataset(train_path)
    validation_set = load_dataset(validation_path)

    network_config = NetworkConfig(
        sample_size=train_set.sample_size,
        block1_filters=args.filters,
        kernel_size=args.kernel_size,
        dense_units=args.dense_units,
    )
    train_config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                               learning_rate=args.learning_rate, seed=args.seed)
    network, history = train(train_set, validation_set, network_config, train_config)
    save_model(network, args.out)
    history_path = (
        Path(args.history) if args.history else Path(args.out).with_suffix(".history.csv")
    )
    history_path.write_text(history_to_table(history))
    final = history[-1]
    print(
        f"saved model to {args.out} "
        f"(val_acc={final['val_acc']:.4f}, val_loss={final['val_loss']:.4f})"
    )
    return 0


# --------------------------------------------------------------------------
# detect
# --------------------------------------------------------------------------

def _load_network_for(matrix, model_path):
    if model_path is None:
        raise ValidationError("--model is required for the deep method")
    network = load_model(model_path)
    return network


def cmd_detect(args) -> int:
    matrix = load_positions(args.positions)
    statistical = deep = None
    model_info = None
    if args.method in ("stat", "both"):
        statistical = detect_bias_statistical(matrix.data, alpha=args.alpha)
    if args.method in ("deep", "both"):
        network = _load_network_for(matrix, args.model)
        deep = predict_matrix(network, matrix.data)
        model_info = {"path": str(args.model),
                      "sample_size": network.config.sample_size}
    report = build_detect_report(
        matrix.data, method=args.method, alpha=args.alpha,
        statistical=statistical, deep=deep,
        provenance=matrix.provenance or None, model_info=model_info,
    )
    if args.out:
        _write_json(report, args.out)
        print(f"wrote report to {args.out}")
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# --------------------------------------------------------------------------
# compare
# --------------------------------------------------------------------------

def _model_for_sample_size(models_dir: Path, sample_size: int):
    path = models_dir / f"model_{sample_size}.sbnn"
    if not path.exists():
        raise MissingResourceError(
            f"no model for sample size {sample_size}: expected {path}"
        )
    network = load_model(path)
    if network.config.sample_size != sample_size:
        raise ValidationError(
            f"{path} was trained for sample size {network.config.sample_size}, "
            f"not {sample_size}"
        )
    return network


def _biased_subject_matrix(spec: ScenarioSpec, dimensionality: int,
                           master_seed: int, subject: int) -> np.ndarray:
    columns = [
        generate(spec, derive_seed(master_seed, "subject", subject, dim)).values
        for dim in range(dimensionality)
    ]
    return np.column_stack(columns)


def cmd_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dimensions = _int_list(args.dimensions, "--dimensions")
    sample_sizes = _int_list(args.sample_sizes, "--sample-sizes")
    models_dir = Path(args.models)

    cells = []
    for sample_size in sample_sizes:
        network = _model_for_sample_size(models_dir, sample_size)
        portfolio = enumerate_portfolio(sample_size)
        biased_specs = [s for s in portfolio if s.class_label is not BiasClass.UNIFORM]
        uniform_spec = next(s for s in portfolio if s.class_label is BiasClass.UNIFORM)
        for dimensionality in dimensions:
            chooser = rng_for(args.seed, "compare-specs", sample_size, dimensionality)
            confusion = {"stat": [0, 0, 0, 0], "deep": [0, 0, 0, 0]}  # tp fp tn fn
            for subject in range(args.count):
                spec = biased_specs[int(chooser.integers(len(biased_specs)))]
                matrix = _biased_subject_matrix(
                    spec, dimensionality,
                    derive_seed(args.seed, "biased", sample_size, dimensionality),
                    subject,
                )
                verdicts = {
                    "stat": detect_bias_statistical(matrix, alpha=args.alpha).biased,
                    "deep": predict_matrix(network, matrix).biased,
                }
                for method, verdict in verdicts.items():
                    confusion[method][0 if verdict else 3] += 1
            for subject in range(args.count):
                matrix = _biased_subject_matrix(
                    uniform_spec, dimensionality,
                    derive_seed(args.seed, "unbiased", sample_size, dimensionality),
                    subject,
                )
                verdicts = {
                    "stat": detect_bias_statistical(matrix, alpha=args.alpha).biased,
                    "deep": predict_matrix(network, matrix).biased,
                }
                for method, verdict in verdicts.items():
                    confusion[method][1 if verdict else 2] += 1
            for method, (tp, fp, tn, fn) in confusion.items():
                cells.append(SummaryCell(method=method, dimensionality=dimensionality,
                                         sample_size=sample_size,
                                         tp=tp, fp=fp, tn=tn, fn=fn))

    summary = ExperimentSummary(cells=tuple(cells), alpha=args.alpha,
                                master_seed=args.seed,
                                biased_subjects=args.count,
                                unbiased_subjects=args.count)
    report = summary.to_record()
    _write_json(report, out / "summary.json")
    render_comparison_summary(report["cells"], out / "summary.svg")
    print(f"wrote comparison summary for {len(cells)} cells to {out}")
    return 0


# --------------------------------------------------------------------------
# explain
# --------------------------------------------------------------------------

def _uniform_background(sample_size: int, count: int, master_seed: int) -> BackgroundSet:
    uniform = ScenarioSpec(scenario_id="uniform", sample_size=sample_size)
    rows = np.stack([
        np.sort(generate(uniform, derive_seed(master_seed, "background", i)).values)
        for i in range(count)
    ])
    return BackgroundSet(samples=rows)


def cmd_explain(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    matrix = load_positions(args.positions)
    network = load_model(args.model)
    if network.config.sample_size != matrix.runs:
        raise ValidationError(
            f"model expects {network.config.sample_size} samples per dimension "
            f"but the positions file has {matrix.runs} runs"
        )
    dimensions = (
        _int_list(args.dimensions, "--dimensions")
        if args.dimensions else list(range(matrix.dimensionality))
    )
    for dimension in dimensions:
        if not 0 <= dimension < matrix.dimensionality:
            raise ValidationError(
                f"dimension {dimension} out of range for a "
                f"{matrix.dimensionality}-dimensional matrix"
            )
    target_override = _parse_class(args.target_class) if args.target_class else None
    background = _uniform_background(matrix.runs, args.background_count, args.seed)

    for dimension in dimensions:
        column = preprocess(matrix.data[:, dimension], network.config.sample_size)
        probabilities = forward_batch(network, column[None])[0]
        predicted = CLASS_ORDER[int(np.argmax(probabilities))]
        target = target_override or predicted
        attribution = shapley_attribute(
            network, column, background, target,
            n_coalitions=args.n_coalitions,
            seed=derive_seed(args.seed, "shap", dimension),
        )
        stem = out / f"attribution_dim{dimension}"
        render_attribution(column, attribution, stem.with_suffix(".svg"),
                           predicted_class=predicted.value)
        save_attribution_table(column, attribution, stem.with_suffix(".csv"))
    print(f"wrote {len(dimensions)} attribution plots and tables to {out}")
    return 0


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

def cmd_benchmark(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    portfolio = list(reference_portfolio())
    if args.selection:
        wanted = args.selection.split(",")
        known = {config.config_id for config in portfolio}
        unknown = set(wanted) - known
        if unknown:
            raise ValidationError(
                f"unknown optimizer ids {sorted(unknown)}; known: {sorted(known)}"
            )
        portfolio = [config for config in portfolio if config.config_id in wanted]
    network = load_model(args.model)
    if network.config.sample_size != args.runs:
        raise ValidationError(
            f"model expects {network.config.sample_size} samples but --runs is "
            f"{args.runs}; the deep pipeline classifies one column of N runs"
        )
    budget = RunBudget(dimensionality=args.n, max_evaluations=args.max_evaluations,
                       runs=args.runs, master_seed=args.seed)

    records = []
    heat_rows = []
    for config in portfolio:
        matrix = collect(config, budget)
        positions_file = out / f"positions_{config.config_id}.csv"
        save_positions(matrix, positions_file)
        statistical = detect_bias_statistical(matrix.data, alpha=args.alpha)
        deep = predict_matrix(network, matrix.data)
        record = ComparisonRecord.of(config.config_id, statistical, deep)
        document = record.to_record()
        document["config"] = config.to_record()
        document["positions_file"] = positions_file.name
        records.append(document)
        heat_rows.append({
            "config_id": config.config_id,
            "deep": document["deep"]["aggregated"],
            "stat_fraction": statistical.fraction_rejected,
        })
        print(f"{config.config_id}: agreement={record.agreement.value}")

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "benchmark",
        "alpha": args.alpha,
        "budget": budget.to_record(),
        "records": records,
    }
    validate_report(report)
    _write_json(report, out / "benchmark.json")
    render_probability_heatmap(heat_rows, out / "benchmark.svg")
    print(f"wrote {len(records)} benchmark records to {out}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="structbias",
        description="Structural-bias detection for continuous heuristic optimizers.",
    )
    parser.add_argument("--version", action="version", version=f"structbias {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="build a labeled training dataset")
    generate.add_argument("--out", required=True, help="output directory")
    generate.add_argument("--sample-size", type=int, default=100)
    generate.add_argument("--per-bias-class", type=int, default=200)
    generate.add_argument("--uniform-count", type=int, default=None,
                          help="uniform samples (default: 4x per-bias-class)")
    generate.add_argument("--train-fraction", type=float, default=0.8)
    generate.add_argument("--scenarios", default=None,
                          help="comma-separated scenario ids (default: all)")
    generate.add_argument("--seed", type=int, default=0)
    generate.set_defaults(func=cmd_generate)

    train_cmd = commands.add_parser("train", help="train the 1D-CNN classifier")
    train_cmd.add_argument("--data", required=True, help="directory from generate")
    train_cmd.add_argument("--out", required=True, help="model output path")
    train_cmd.add_argument("--epochs", type=int, default=50)
    train_cmd.add_argument("--batch-size", type=int, default=64)
    train_cmd.add_argument("--learning-rate", type=float, default=1e-3)
    train_cmd.add_argument("--filters", type=int, default=32)
    train_cmd.add_argument("--kernel-size", type=int, default=5)
    train_cmd.add_argument("--dense-units", type=int, default=64)
    train_cmd.add_argument("--history", default=None, help="history CSV path")
    train_cmd.add_argument("--seed", type=int, default=0)
    train_cmd.set_defaults(func=cmd_train)

    detect = commands.add_parser("detect", help="run detection on a positions file")
    detect.add_argument("--positions", required=True)
    detect.add_argument("--model", default=None)
    detect.add_argument("--alpha", type=float, default=0.01)
    detect.add_argument("--method", choices=["stat", "deep", "both"], default="both")
    detect.add_argument("--out", default=None, help="report path (default: stdout)")
    detect.set_defaults(func=cmd_detect)

    compare = commands.add_parser("compare", help="dual-pipeline comparison experiment")
    compare.add_argument("--out", required=True)
    compare.add_argument("--models", required=True,
                         help="directory containing model_<sample_size>.sbnn files")
    compare.add_argument("--dimensions", default="1,10")
    compare.add_argument("--sample-sizes", default="100,600")
    compare.add_argument("--count", type=int, default=200,
                         help="biased and unbiased subjects per condition")
    compare.add_argument("--alpha", type=float, default=0.01)
    compare.add_argument("--seed", type=int, default=0)
    compare.set_defaults(func=cmd_compare)

    explain = commands.add_parser("explain", help="Shapley attribution plots")
    explain.add_argument("--positions", required=True)
    explain.add_argument("--model", required=True)
    explain.add_argument("--out", required=True)
    explain.add_argument("--target-class", default=None)
    explain.add_argument("--dimensions", default=None,
                         help="comma-separated dimension indices (default: all)")
    explain.add_argument("--n-coalitions", type=int, default=None)
    explain.add_argument("--background-count", type=int, default=100)
    explain.add_argument("--seed", type=int, default=0)
    explain.set_defaults(func=cmd_explain)

    benchmark = commands.add_parser("benchmark", help="run the optimizer portfolio")
    benchmark.add_argument("--out", required=True)
    benchmark.add_argument("--model", required=True)
    benchmark.add_argument("--n", type=int, default=30, help="dimensionality")
    benchmark.add_argument("--runs", type=int, default=100)
    benchmark.add_argument("--max-evaluations", type=int, default=None,
                           help="per run (default: 1000*n)")
    benchmark.add_argument("--selection", default=None,
                           help="comma-separated optimizer config ids")
    benchmark.add_argument("--alpha", type=float, default=0.01)
    benchmark.add_argument("--seed", type=int, default=0)
    benchmark.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StructBiasError as error:
        print(json.dumps(error.to_record()), file=sys.stderr)
        return error.exit_code
    except OSError as error:
        print(json.dumps({"error": "io", "message": str(error)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
