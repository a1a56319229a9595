"""Multi-target regression random forests with local, conclusive rule-based
explanations."""

__version__ = "0.1.0"

from .dataset import Dataset, DatasetError, FoldPlan, kfold, load_csv, save_csv
from .forest import (
    Forest,
    ForestConfig,
    ModelError,
    Tree,
    evaluate_mae,
    fit,
    load,
    predict,
    predict_batch,
    predict_tree,
    save,
)
from .paths import AssociationModel, Path, extract_paths, mine, rank_features
from .reduction import (
    AllowedError,
    Explanation,
    ReductionResult,
    Rule,
    RuleTerm,
    adjusted_prediction,
    check_conclusive,
    compose_rule,
    default_allowed_error,
    explain,
    local_error,
    reduce_paths,
    render_rule,
)
from .evaluation import (
    BenchRow,
    ExperimentRow,
    MetricReport,
    coverage,
    make_synthetic,
    rule_length,
    rule_precision,
    run_experiment,
    scalability_bench,
    standardize_targets,
)

__all__ = [
    "AllowedError",
    "AssociationModel",
    "BenchRow",
    "Dataset",
    "DatasetError",
    "Explanation",
    "ExperimentRow",
    "FoldPlan",
    "Forest",
    "ForestConfig",
    "MetricReport",
    "ModelError",
    "Path",
    "ReductionResult",
    "Rule",
    "RuleTerm",
    "Tree",
    "adjusted_prediction",
    "check_conclusive",
    "compose_rule",
    "coverage",
    "default_allowed_error",
    "evaluate_mae",
    "explain",
    "extract_paths",
    "fit",
    "kfold",
    "load",
    "load_csv",
    "local_error",
    "make_synthetic",
    "mine",
    "predict",
    "predict_batch",
    "predict_tree",
    "rank_features",
    "reduce_paths",
    "render_rule",
    "rule_length",
    "rule_precision",
    "run_experiment",
    "save",
    "save_csv",
    "scalability_bench",
    "standardize_targets",
]
