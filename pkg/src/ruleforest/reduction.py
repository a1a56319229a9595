"""Path reduction under an allowed-error budget and conclusive rule assembly.

The enrichment loop grows a feature set in confidence order; a path is kept
once all of its features are inside the set. Excluded trees are accounted for
by substituting the leaf extreme farthest from the prediction, which yields
both the local error the budget is tested against and the adjusted
prediction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, kfold
from .forest import Forest, ForestConfig, evaluate_mae, fit, predict, predict_batch
from .paths import AssociationModel, Path, rank_features

SUBSTITUTIONS = ("per_target", "per_tree")


@dataclass(frozen=True)
class AllowedError:
    """Error budget: one shared value (global scheme) or one per target."""

    scheme: str  # "global_mean" or "per_target"
    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", values)
        if self.scheme not in ("global_mean", "per_target"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if (values < 0).any():
            raise ValueError("allowed error values must be non-negative")
        if self.scheme == "global_mean" and values.shape != (1,):
            raise ValueError("global scheme takes a single value")

    @classmethod
    def global_mean(cls, value: float) -> "AllowedError":
        return cls("global_mean", np.asarray([value]))

    @classmethod
    def per_target(cls, values) -> "AllowedError":
        return cls("per_target", np.asarray(values))

    def accepts(self, local_errors: np.ndarray) -> bool:
        if self.scheme == "global_mean":
            return float(local_errors.mean()) <= float(self.values[0])
        if local_errors.shape != self.values.shape:
            raise ValueError("per-target budget length does not match target count")
        return bool((local_errors <= self.values).all())


@dataclass
class ReductionResult:
    kept: frozenset[int]
    excluded: frozenset[int]
    feature_set: frozenset[int]
    local_errors: np.ndarray
    adjusted_prediction: np.ndarray
    original_prediction: np.ndarray


@dataclass(frozen=True)
class RuleTerm:
    feature_index: int
    lo: float
    hi: float
    lo_strict: bool  # True when lo comes from a > split rather than a data bound


@dataclass
class Rule:
    """Conjunction of feature intervals with per-target value +/- bound."""

    antecedent: list[RuleTerm]
    consequent: list[tuple[int, float, float]]  # (target_index, value, bound)
    kept_path_count: int


@dataclass
class ConclusiveReport:
    max_deviation: np.ndarray
    envelope_violations: int


def _tree_stats(paths: list[Path], forest: Forest):
    preds = np.vstack([p.leaf_prediction for p in paths])
    mins = np.vstack([t.leaf_min for t in forest.trees])
    maxs = np.vstack([t.leaf_max for t in forest.trees])
    return preds, mins, maxs


def substituted_predictions(
    paths: list[Path], kept, forest: Forest, substitution: str = "per_target"
) -> tuple[np.ndarray, np.ndarray]:
    """(preds, r_preds) per tree and target.

    Kept trees keep their own predictions. Each excluded tree is replaced by
    a leaf extreme: under ``per_target`` the whole excluded set moves to the
    side (low or high) whose total distance from the predictions is largest,
    per target; under ``per_tree`` each tree independently takes whichever of
    its extremes is farthest from its own prediction.
    """
    if substitution not in SUBSTITUTIONS:
        raise ValueError(f"unknown substitution {substitution!r}")
    kept = frozenset(kept)
    if not kept:
        raise ValueError("kept set must be non-empty")
    preds, mins, maxs = _tree_stats(paths, forest)
    r_preds = preds.copy()
    excluded = np.asarray([i for i in range(len(paths)) if i not in kept], dtype=np.int64)
    if excluded.size == 0:
        return preds, r_preds
    if substitution == "per_tree":
        low_gap = preds[excluded] - mins[excluded]
        high_gap = maxs[excluded] - preds[excluded]
        r_preds[excluded] = np.where(low_gap >= high_gap, mins[excluded], maxs[excluded])
    else:
        low_total = (preds[excluded] - mins[excluded]).sum(axis=0)
        high_total = (maxs[excluded] - preds[excluded]).sum(axis=0)
        take_low = low_total >= high_total
        r_preds[excluded] = np.where(take_low, mins[excluded], maxs[excluded])
    return preds, r_preds


def local_error(
    paths: list[Path], kept, forest: Forest, substitution: str = "per_target"
) -> np.ndarray:
    """Per-target mean absolute gap between actual and substituted tree
    predictions; zero when every tree is kept."""
    preds, r_preds = substituted_predictions(paths, kept, forest, substitution)
    return np.abs(preds - r_preds).mean(axis=0)


def adjusted_prediction(
    paths: list[Path], kept, forest: Forest, substitution: str = "per_target"
) -> np.ndarray:
    """Forest mean recomputed with excluded trees at their substituted
    extremes."""
    _, r_preds = substituted_predictions(paths, kept, forest, substitution)
    return r_preds.mean(axis=0)


def reduce_paths(
    paths: list[Path],
    assoc: AssociationModel,
    allowed: AllowedError,
    forest: Forest,
    rank_order: str = "ascending",
    substitution: str = "per_target",
) -> ReductionResult:
    """Enrich the feature set one feature at a time until the kept paths meet
    the budget.

    Kept paths are those whose conditions only mention enriched features.
    Steps with an empty kept set never pass; once every feature is in, all
    paths are kept and the local error is zero, so the loop always
    terminates with an accepted result.
    """
    n = len(paths)
    feature_sets = [p.feature_set for p in paths]
    ranking = rank_features(assoc, rank_order)
    original = np.vstack([p.leaf_prediction for p in paths]).mean(axis=0)

    feature_set: set[int] = set()
    steps = [None] + ranking  # step 0 tests the empty feature set
    kept: frozenset[int] = frozenset()
    errors = None
    for f in steps:
        if f is not None:
            feature_set.add(f)
        kept = frozenset(i for i in range(n) if feature_sets[i] <= feature_set)
        if not kept:
            continue
        errors = local_error(paths, kept, forest, substitution)
        if allowed.accepts(errors):
            break
    if errors is None:  # unreachable: the full feature set keeps every path
        raise RuntimeError("reduction loop ended without a kept set")
    return ReductionResult(
        kept=kept,
        excluded=frozenset(range(n)) - kept,
        feature_set=frozenset(feature_set),
        local_errors=errors,
        adjusted_prediction=adjusted_prediction(paths, kept, forest, substitution),
        original_prediction=original,
    )


def default_allowed_error(dataset: Dataset, config: ForestConfig, k: int = 10) -> AllowedError:
    """Per-target k-fold cross-validated MAE of the model, the budget used
    when the caller does not supply one. The mean of the values serves the
    global scheme."""
    plan = kfold(dataset.n, k, config.seed)
    abs_err = np.zeros(dataset.m)
    for fold in range(k):
        model = fit(dataset.subset(plan.train_rows(fold)), config)
        test = dataset.subset(plan.test_rows(fold))
        preds = predict_batch(model, test.features)
        abs_err += np.abs(preds - test.targets).sum(axis=0)
    return AllowedError.per_target(abs_err / dataset.n)


def compose_rule(reduction: ReductionResult, paths: list[Path], x, forest: Forest) -> Rule:
    """Intersect the kept paths' intervals per feature into one conjunction.

    Using the tightest bounds on each side keeps every kept tree routed to
    the same leaf for any instance the rule covers. Sides a path leaves
    unbounded fall back to the training-data feature bounds.
    """
    x = forest._check_vector(x)
    terms = []
    for f in sorted({f for i in reduction.kept for f in paths[i].conditions}):
        lo, hi = -np.inf, np.inf
        for i in reduction.kept:
            cond = paths[i].conditions.get(f)
            if cond is not None:
                lo = max(lo, cond[0])
                hi = min(hi, cond[1])
        lo_strict = np.isfinite(lo)
        if not lo_strict:
            lo = float(forest.feature_bounds[f, 0])
        if not np.isfinite(hi):
            hi = float(forest.feature_bounds[f, 1])
        # instances outside the training range must still satisfy their own rule
        lo = min(lo, float(x[f]))
        hi = max(hi, float(x[f]))
        terms.append(RuleTerm(f, float(lo), float(hi), lo_strict))
    consequent = [
        (t, float(reduction.original_prediction[t]), float(reduction.local_errors[t]))
        for t in range(forest.m)
    ]
    return Rule(antecedent=terms, consequent=consequent, kept_path_count=len(reduction.kept))


def render_rule(rule: Rule, feature_names, target_names, precision: int = 2) -> str:
    """One-line text form: ``if lo <= name <= hi & ... then target: v±b, ...``.

    Strict lower bounds are displayed closed by nudging them up one step at
    the requested precision.
    """
    step = 10.0 ** (-precision)

    def num(v: float) -> str:
        return f"{v:.{precision}f}"

    parts = []
    for term in rule.antecedent:
        lo = term.lo + step if term.lo_strict else term.lo
        parts.append(f"{num(lo)} <= {feature_names[term.feature_index]} <= {num(term.hi)}")
    consequents = ", ".join(
        f"{target_names[t]}: {num(v)}±{num(b)}" for t, v, b in rule.consequent
    )
    if parts:
        return f"if {' & '.join(parts)} then {consequents}"
    return f"then {consequents}"


def reduction_envelope(reduction: ReductionResult, paths: list[Path], forest: Forest):
    """Per-target [low, high] bounds on what the forest can predict while all
    kept trees stay on their leaves."""
    preds, mins, maxs = _tree_stats(paths, forest)
    kept = np.asarray(sorted(reduction.kept), dtype=np.int64)
    excl = np.asarray(sorted(reduction.excluded), dtype=np.int64)
    kept_sum = preds[kept].sum(axis=0)
    n = len(paths)
    if excl.size:
        return (kept_sum + mins[excl].sum(axis=0)) / n, (kept_sum + maxs[excl].sum(axis=0)) / n
    return kept_sum / n, kept_sum / n


def check_conclusive(
    rule: Rule,
    reduction: ReductionResult,
    forest: Forest,
    x,
    trials: int = 1000,
    seed: int = 0,
) -> ConclusiveReport:
    """Probe the rule empirically with random in-range perturbations.

    Antecedent features are sampled inside their rule interval and all other
    features anywhere inside the training bounds; every perturbed prediction
    must stay inside the reduction envelope.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = forest._check_vector(x)
    rng = np.random.default_rng(seed)
    lo = forest.feature_bounds[:, 0].copy()
    hi = forest.feature_bounds[:, 1].copy()
    for term in rule.antecedent:
        lo[term.feature_index] = term.lo
        hi[term.feature_index] = term.hi
    samples = rng.uniform(lo, hi, size=(trials, forest.d))

    from .paths import extract_paths  # local import avoids a module cycle

    paths = extract_paths(forest, x)
    env_lo, env_hi = reduction_envelope(reduction, paths, forest)
    preds = predict_batch(forest, samples)
    original = predict(forest, x)
    tolerance = 1e-9  # floating-point slack on the envelope test
    violations = int(
        ((preds < env_lo - tolerance) | (preds > env_hi + tolerance)).any(axis=1).sum()
    )
    return ConclusiveReport(
        max_deviation=np.abs(preds - original).max(axis=0),
        envelope_violations=violations,
    )


@dataclass
class Explanation:
    """Everything one explain call produces, plus how long it took."""

    rule: Rule
    reduction: ReductionResult
    paths: list[Path]
    elapsed_seconds: float
    rendered: str = field(default="", repr=False)


def explain(
    forest: Forest,
    x,
    allowed: AllowedError,
    min_support: float = 0.1,
    rank_order: str = "ascending",
    substitution: str = "per_target",
    precision: int = 2,
) -> Explanation:
    """Full pipeline for one instance: extract, mine, reduce, compose."""
    from .paths import extract_paths, mine

    start = time.perf_counter()
    paths = extract_paths(forest, x)
    assoc = mine(paths, min_support)
    reduction = reduce_paths(paths, assoc, allowed, forest, rank_order, substitution)
    rule = compose_rule(reduction, paths, x, forest)
    elapsed = time.perf_counter() - start
    rendered = render_rule(rule, forest.feature_names, forest.target_names, precision)
    return Explanation(rule, reduction, paths, elapsed, rendered)
