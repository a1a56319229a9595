"""Per-tree decision paths for one instance, plus association-rule scoring.

The paths' feature sets act as transactions; pairwise itemset mining yields a
confidence score per feature, which orders the enrichment loop in the
reduction step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .forest import LEAF, Forest


@dataclass
class Path:
    """One root-to-leaf trace: the feature intervals the instance satisfied.

    Each condition maps a feature index to an interval (lower, upper] with
    lower possibly -inf and upper possibly +inf; the instance's value lies
    strictly above lower and at or below upper.
    """

    tree_index: int
    conditions: dict[int, tuple[float, float]]
    leaf_prediction: np.ndarray
    leaf_id: int

    @property
    def feature_set(self) -> frozenset[int]:
        return frozenset(self.conditions)


@dataclass
class AssociationModel:
    """Supports for singleton/pair itemsets, the derived one-to-one rules,
    and the per-feature confidence scores consumed by the reducer."""

    itemset_supports: dict[frozenset[int], float] = field(default_factory=dict)
    rules: list[tuple[int, int, float]] = field(default_factory=list)
    feature_scores: dict[int, float] = field(default_factory=dict)


def extract_paths(forest: Forest, x) -> list[Path]:
    """Trace every tree for instance x, recording tightened split intervals."""
    x = forest._check_vector(x)
    paths = []
    for t, tree in enumerate(forest.trees):
        conditions: dict[int, list[float]] = {}
        node = 0
        while tree.feature[node] != LEAF:
            f = int(tree.feature[node])
            thr = float(tree.threshold[node])
            bounds = conditions.setdefault(f, [-np.inf, np.inf])
            if x[f] <= thr:
                bounds[1] = min(bounds[1], thr)
                node = int(tree.left[node])
            else:
                bounds[0] = max(bounds[0], thr)
                node = int(tree.right[node])
        paths.append(
            Path(
                tree_index=t,
                conditions={f: (lo, hi) for f, (lo, hi) in conditions.items()},
                leaf_prediction=tree.value[node].copy(),
                leaf_id=node,
            )
        )
    return paths


def mine(paths: list[Path], min_support: float = 0.1) -> AssociationModel:
    """Mine pairwise association rules over the paths' feature sets.

    Transactions are the per-path feature sets. Supports are computed for
    every singleton and for every pair reaching ``min_support``; each
    qualifying pair yields both ordered rules with confidence
    support(pair) / support(antecedent). A feature's score is the mean
    confidence over rules it fronts, falling back to its own support when it
    fronts none.
    """
    if not paths:
        raise ValueError("need at least one path")
    if not 0.0 < min_support <= 1.0:
        raise ValueError("min_support must be in (0, 1]")
    transactions = [p.feature_set for p in paths]
    n = len(transactions)
    features = sorted(set().union(*transactions)) if any(transactions) else []

    supports: dict[frozenset[int], float] = {}
    for f in features:
        supports[frozenset((f,))] = sum(1 for t in transactions if f in t) / n
    for f, g in combinations(features, 2):
        pair = frozenset((f, g))
        support = sum(1 for t in transactions if pair <= t) / n
        if support >= min_support:
            supports[pair] = support

    rules: list[tuple[int, int, float]] = []
    confidences: dict[int, list[float]] = {f: [] for f in features}
    for f, g in combinations(features, 2):
        pair_support = supports.get(frozenset((f, g)))
        if pair_support is None:
            continue
        for a, b in ((f, g), (g, f)):
            base = supports[frozenset((a,))]
            if base > 0:
                conf = pair_support / base
                rules.append((a, b, conf))
                confidences[a].append(conf)
    rules.sort(key=lambda r: (r[0], r[1]))

    scores = {
        f: (sum(confs) / len(confs)) if confs else supports[frozenset((f,))]
        for f, confs in confidences.items()
    }
    return AssociationModel(itemset_supports=supports, rules=rules, feature_scores=scores)


def rank_features(model: AssociationModel, order: str = "ascending") -> list[int]:
    """Features sorted by confidence score; ties break on ascending index."""
    if order not in ("ascending", "descending"):
        raise ValueError(f"unknown rank order {order!r}")
    sign = 1.0 if order == "ascending" else -1.0
    return sorted(model.feature_scores, key=lambda f: (sign * model.feature_scores[f], f))
