"""Command-line entry point: train, explain, evaluate, bench, inspect."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .dataset import Dataset, DatasetError, load_csv
from .evaluation import make_synthetic, run_experiment, scalability_bench
from .forest import Forest, ForestConfig, ModelError, evaluate_mae, fit, load, save
from .reduction import AllowedError, check_conclusive, default_allowed_error, explain

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

MISSING_FLAGS = {"zero": "zero_fill", "drop": "drop_row", "error": "error"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _parse_max_features(text: str):
    if text in ("all", "sqrt"):
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"invalid --max-features value {text!r}") from None


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise UsageError(f"invalid numeric list {text!r}") from None


def _config_from_args(args) -> ForestConfig:
    return ForestConfig(
        n_estimators=args.estimators,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_leaf,
        max_features=_parse_max_features(args.max_features),
        bootstrap=not args.no_bootstrap,
        seed=args.seed,
    )


def _add_forest_flags(parser):
    parser.add_argument("--estimators", type=int, default=500)
    parser.add_argument("--max-depth", type=int, default=None)
    parser.add_argument("--min-leaf", type=int, default=1)
    parser.add_argument("--max-features", default="sqrt", help="all, sqrt or a fraction")
    parser.add_argument("--no-bootstrap", action="store_true")
    parser.add_argument("--seed", type=int, default=0)


def _add_data_flags(parser, required=True):
    parser.add_argument("--data", required=required, help="CSV file with a header row")
    parser.add_argument("--targets", required=required, help="comma-separated target column names")
    parser.add_argument("--missing", choices=sorted(MISSING_FLAGS), default="zero")


def _load_dataset(args) -> Dataset:
    return load_csv(args.data, args.targets.split(","), MISSING_FLAGS[args.missing])


def _effective_config(command: str, args) -> str:
    pairs = " ".join(
        f"{key}={value}" for key, value in sorted(vars(args).items()) if key != "func"
    )
    return f"# ruleforest {command} {pairs}"


def _resolve_allowed(values: list[float], scheme: str | None, m: int) -> AllowedError:
    if scheme is None:
        scheme = "global" if len(values) == 1 else "per-target"
    if scheme == "global":
        if len(values) != 1:
            raise UsageError("--scheme global takes exactly one allowed-error value")
        return AllowedError.global_mean(values[0])
    if len(values) != m:
        raise UsageError(f"--scheme per-target needs {m} allowed-error values, got {len(values)}")
    return AllowedError.per_target(values)


def cmd_train(args) -> int:
    data = _load_dataset(args)
    config = _config_from_args(args)
    forest = fit(data, config)
    save(forest, args.out)
    per_target, mean = evaluate_mae(forest, data)
    print(_effective_config("train", args))
    print(f"trained {config.n_estimators} trees on {data.n} rows -> {args.out}")
    print("training MAE per target: " + ", ".join(f"{v:.4f}" for v in per_target) + f" (mean {mean:.4f})")
    return EXIT_OK


def _instance_from_args(args, forest: Forest) -> np.ndarray:
    if args.instance is not None:
        values = _parse_floats(args.instance)
        if len(values) != forest.d:
            raise UsageError(f"instance has {len(values)} values, model expects {forest.d} features")
        return np.asarray(values)
    if args.instance_index is None or args.data is None:
        raise UsageError("provide --instance values or --instance-index with --data")
    data = _load_dataset(args)
    if tuple(data.feature_names) != tuple(forest.feature_names):
        raise DatasetError("CSV feature columns do not match the model")
    if not 0 <= args.instance_index < data.n:
        raise UsageError(f"--instance-index out of range [0, {data.n})")
    return data.features[args.instance_index]


def cmd_explain(args) -> int:
    forest = load(args.model)
    x = _instance_from_args(args, forest)
    if args.allowed_error is not None:
        allowed = _resolve_allowed(_parse_floats(args.allowed_error), args.scheme, forest.m)
    elif args.data is not None and args.targets is not None:
        allowed = default_allowed_error(_load_dataset(args), forest.config, k=10)
        if args.scheme == "global":
            allowed = AllowedError.global_mean(float(allowed.values.mean()))
    else:
        raise UsageError("provide --allowed-error, or --data/--targets to derive the CV default")

    result = explain(
        forest,
        x,
        allowed,
        min_support=args.min_support,
        rank_order={"asc": "ascending", "desc": "descending"}[args.rank_order],
        precision=args.precision,
    )
    print(_effective_config("explain", args))
    print(result.rendered)
    report = {
        "kept_paths": len(result.reduction.kept),
        "excluded_paths": len(result.reduction.excluded),
        "feature_set": sorted(result.reduction.feature_set),
        "local_errors": result.reduction.local_errors.tolist(),
        "adjusted_prediction": result.reduction.adjusted_prediction.tolist(),
        "original_prediction": result.reduction.original_prediction.tolist(),
        "elapsed_seconds": result.elapsed_seconds,
    }
    if args.check_conclusive:
        probe = check_conclusive(
            result.rule, result.reduction, forest, x, trials=args.check_conclusive, seed=args.seed
        )
        report["max_deviation"] = probe.max_deviation.tolist()
        report["envelope_violations"] = probe.envelope_violations
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(_effective_config("explain", args) + "\n")
            json.dump(report, fh, indent=2)
            fh.write("\n")
    else:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    data = _load_dataset(args)
    config = _config_from_args(args)
    values = _parse_floats(args.allowed_errors)
    allowed = [AllowedError.global_mean(v) for v in values]
    rows = run_experiment(
        data, config, allowed, k=args.folds, seed=args.seed, min_support=args.min_support
    )
    header = ["allowed_error", "coverage", "rule_precision_mae", "rule_precision_truth_mae", "rule_length"]
    out = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        out.write(_effective_config("evaluate", args) + "\n")
        writer = csv.writer(out)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    row.label,
                    f"{row.coverage:.4f}",
                    "" if row.rule_precision_mae is None else f"{row.rule_precision_mae:.4f}",
                    "" if row.rule_precision_truth_mae is None else f"{row.rule_precision_truth_mae:.4f}",
                    f"{row.rule_length:.2f}",
                ]
            )
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        n, d, m = (int(v) for v in args.synthetic.split(","))
    except ValueError:
        raise UsageError("--synthetic expects n,d,m") from None
    data = make_synthetic(n, d, m, noise=args.noise, seed=args.seed)
    config = _config_from_args(args)
    rows = scalability_bench(
        data,
        config,
        _parse_floats(args.allowed_errors),
        instances=args.instances,
        seed=args.seed,
        min_support=args.min_support,
    )
    out = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        out.write(_effective_config("bench", args) + "\n")
        writer = csv.writer(out)
        writer.writerow(["allowed_error", "mean_time_seconds", "mean_kept_paths"])
        for row in rows:
            writer.writerow(
                [f"{row.allowed_error:g}", f"{row.mean_time_seconds:.4f}", f"{row.mean_kept_paths:.2f}"]
            )
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_inspect(args) -> int:
    forest = load(args.model)
    depths = [tree.depth() for tree in forest.trees]
    leaf_counts = [int((tree.feature == -1).sum()) for tree in forest.trees]
    print(_effective_config("inspect", args))
    print(f"trees: {forest.n_trees}")
    print(f"features: {forest.d} ({', '.join(forest.feature_names)})")
    print(f"targets: {forest.m} ({', '.join(forest.target_names)})")
    print(f"depth: min {min(depths)} mean {np.mean(depths):.1f} max {max(depths)}")
    print(f"leaves per tree: min {min(leaf_counts)} mean {np.mean(leaf_counts):.1f} max {max(leaf_counts)}")
    for t, name in enumerate(forest.target_names):
        lo = min(float(tree.leaf_min[t]) for tree in forest.trees)
        hi = max(float(tree.leaf_max[t]) for tree in forest.trees)
        print(f"leaf extremes[{name}]: [{lo:.4f}, {hi:.4f}]")
    for f, name in enumerate(forest.feature_names):
        print(f"feature_bounds[{name}]: [{forest.feature_bounds[f, 0]:.4f}, {forest.feature_bounds[f, 1]:.4f}]")
    cfg = forest.config
    print(
        "config: "
        f"estimators={cfg.n_estimators} max_depth={cfg.max_depth} min_leaf={cfg.min_samples_leaf} "
        f"max_features={cfg.max_features} bootstrap={cfg.bootstrap} seed={cfg.seed}"
    )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ruleforest", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest and write a model file")
    _add_data_flags(p)
    _add_forest_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="produce a conclusive rule for one instance")
    p.add_argument("--model", required=True)
    p.add_argument("--instance", help="inline comma-separated feature values")
    p.add_argument("--instance-index", type=int, help="row index into --data")
    _add_data_flags(p, required=False)
    p.add_argument("--allowed-error", help="one value (global) or one per target")
    p.add_argument("--scheme", choices=["global", "per-target"])
    p.add_argument("--min-support", type=float, default=0.1)
    p.add_argument("--rank-order", choices=["asc", "desc"], default="asc")
    p.add_argument("--precision", type=int, default=2)
    p.add_argument("--check-conclusive", type=int, metavar="N", help="probe with N perturbations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write the sidecar report JSON here")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="cross-validated explanation metrics")
    _add_data_flags(p)
    _add_forest_flags(p)
    p.add_argument("--allowed-errors", required=True, help="comma-separated global budgets")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--min-support", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="allowed-error scalability sweep on synthetic data")
    p.add_argument("--synthetic", required=True, metavar="n,d,m")
    p.add_argument("--noise", type=float, default=0.1)
    _add_forest_flags(p)
    p.add_argument("--allowed-errors", required=True, help="ascending comma-separated budgets")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--min-support", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="summarize a model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ModelError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
