"""Multi-output regression random forest with explainer-facing internals.

Trees are stored as flat arrays so prediction over instance batches is
vectorized. Each tree also caches its per-target leaf extremes, which the
reduction step needs to bound what an excluded tree could have predicted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MODEL_FORMAT = "ruleforest-model"
MODEL_VERSION = 1

LEAF = -1  # sentinel in the per-node feature array


class ModelError(ValueError):
    """Raised for unusable model files or malformed queries."""


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 500
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: str | float = "sqrt"  # "all", "sqrt" or a fraction in (0, 1]
    bootstrap: bool = True
    seed: int = 0
    normalize_targets: bool = False  # per-target variance scaling in the split gain

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ModelError("n_estimators must be >= 1")
        if self.min_samples_leaf < 1:
            raise ModelError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ModelError("max_depth must be >= 0")
        if isinstance(self.max_features, str):
            if self.max_features not in ("all", "sqrt"):
                raise ModelError(f"unknown max_features {self.max_features!r}")
        else:
            if not 0.0 < float(self.max_features) <= 1.0:
                raise ModelError("max_features fraction must be in (0, 1]")

    def features_per_split(self, d: int) -> int:
        if self.max_features == "all":
            return d
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(d)))
        return max(1, int(round(float(self.max_features) * d)))


@dataclass
class Tree:
    """Flat binary tree. ``feature[i] == LEAF`` marks a leaf node.

    Routing convention: an instance with value <= threshold goes left,
    otherwise right. ``value`` holds the leaf prediction vector for leaves
    (zeros elsewhere); ``leaf_min``/``leaf_max`` are per-target extremes over
    all leaf predictions.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    sample_count: np.ndarray
    leaf_min: np.ndarray = field(init=False)
    leaf_max: np.ndarray = field(init=False)

    def __post_init__(self):
        leaves = self.value[self.feature == LEAF]
        self.leaf_min = leaves.min(axis=0)
        self.leaf_max = leaves.max(axis=0)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def leaf_for(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] != LEAF:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node

    def leaves_for_batch(self, X: np.ndarray) -> np.ndarray:
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = node[active]
            go_left = X[rows[active], self.feature[idx]] <= self.threshold[idx]
            node[active] = np.where(go_left, self.left[idx], self.right[idx])
            active = self.feature[node] != LEAF
        return node

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        best = 0
        for node in range(self.n_nodes):
            if self.feature[node] == LEAF:
                best = max(best, depths[node])
            else:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(best)


@dataclass
class Forest:
    trees: list[Tree]
    config: ForestConfig
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]
    feature_bounds: np.ndarray  # shape (d, 2): training min/max per feature

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def d(self) -> int:
        return len(self.feature_names)

    @property
    def m(self) -> int:
        return len(self.target_names)

    def _check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ModelError(f"expected a vector of {self.d} features, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise ModelError("instance contains non-finite values")
        return x


def predict_tree(tree: Tree, x: np.ndarray) -> np.ndarray:
    return tree.value[tree.leaf_for(np.asarray(x, dtype=np.float64))]


def predict(forest: Forest, x) -> np.ndarray:
    """Componentwise mean of the per-tree leaf predictions."""
    x = forest._check_vector(x)
    total = np.zeros(forest.m)
    for tree in forest.trees:
        total += tree.value[tree.leaf_for(x)]
    return total / forest.n_trees


def predict_batch(forest: Forest, X) -> np.ndarray:
    """Forest predictions for an (n, d) batch; returns an (n, m) array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.d:
        raise ModelError(f"expected an (n, {forest.d}) matrix, got shape {X.shape}")
    total = np.zeros((X.shape[0], forest.m))
    for tree in forest.trees:
        total += tree.value[tree.leaves_for_batch(X)]
    return total / forest.n_trees


def _best_split(X, Y, candidates, min_leaf, target_scale):
    """Best (feature, threshold, gain) over candidate features.

    Gain is the summed per-target reduction in sum-of-squared-errors, with an
    optional per-target scale. Ties resolve to the lowest feature index and
    then the lowest threshold because candidates are scanned in ascending
    order and only strictly better gains replace the incumbent.
    """
    n = X.shape[0]
    col_sum = Y.sum(axis=0)
    parent_sse = ((Y * Y).sum(axis=0) - col_sum * col_sum / n) / target_scale
    parent = parent_sse.sum()
    best = (None, None, 0.0)
    for f in candidates:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = Y[order]
        cum = np.cumsum(ys, axis=0)
        cum_sq = np.cumsum(ys * ys, axis=0)
        sizes = np.arange(1, n)  # left child size at split position i
        boundary = xs[:-1] < xs[1:]
        legal = boundary & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not legal.any():
            continue
        pos = np.flatnonzero(legal)
        left_n = (pos + 1).astype(np.float64)
        right_n = n - left_n
        left_sum = cum[pos]
        right_sum = col_sum - left_sum
        left_sse = (cum_sq[pos] - left_sum * left_sum / left_n[:, None]) / target_scale
        right_sse = (cum_sq[-1] - cum_sq[pos] - right_sum * right_sum / right_n[:, None]) / target_scale
        gains = parent - left_sse.sum(axis=1) - right_sse.sum(axis=1)
        k = int(np.argmax(gains))
        if gains[k] > best[2]:
            thr = 0.5 * (xs[pos[k]] + xs[pos[k] + 1])
            best = (int(f), float(thr), float(gains[k]))
    return best


def _grow_tree(X, Y, config: ForestConfig, rng, target_scale) -> Tree:
    d = X.shape[1]
    k_feats = config.features_per_split(d)
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(None)
        count.append(0)
        return len(feature) - 1

    def build(node, rows, depth):
        sub_x, sub_y = X[rows], Y[rows]
        count[node] = rows.shape[0]
        splittable = rows.shape[0] >= 2 * config.min_samples_leaf and (
            config.max_depth is None or depth < config.max_depth
        )
        if splittable:
            if k_feats >= d:
                cand = np.arange(d)
            else:
                cand = np.sort(rng.choice(d, size=k_feats, replace=False))
            f, thr, gain = _best_split(sub_x, sub_y, cand, config.min_samples_leaf, target_scale)
            if f is not None and gain > 0.0:
                feature[node] = f
                threshold[node] = thr
                left[node] = new_node()
                right[node] = new_node()
                mask = sub_x[:, f] <= thr
                build(left[node], rows[mask], depth + 1)
                build(right[node], rows[~mask], depth + 1)
                return
        value[node] = sub_y.mean(axis=0)

    root = new_node()
    build(root, np.arange(X.shape[0]), 0)
    m = Y.shape[1]
    values = np.vstack([np.zeros(m) if v is None else v for v in value])
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=values,
        sample_count=np.asarray(count, dtype=np.int64),
    )


def fit(train, config: ForestConfig) -> Forest:
    """Train a forest of CART-style multi-output trees.

    Each tree's randomness (bootstrap resample, feature subsets) comes from a
    generator seeded by (config.seed, tree index), so the result is identical
    regardless of training order or parallelism.
    """
    X, Y = train.features, train.targets
    n = X.shape[0]
    if n < config.min_samples_leaf:
        raise ModelError(f"dataset of {n} rows cannot satisfy min_samples_leaf={config.min_samples_leaf}")
    if config.normalize_targets:
        scale = Y.var(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        scale = np.ones(Y.shape[1])
    trees = []
    for t in range(config.n_estimators):
        rng = np.random.default_rng([config.seed, t])
        if config.bootstrap:
            rows = rng.integers(0, n, size=n)
            trees.append(_grow_tree(X[rows], Y[rows], config, rng, scale))
        else:
            trees.append(_grow_tree(X, Y, config, rng, scale))
    bounds = np.column_stack([X.min(axis=0), X.max(axis=0)])
    return Forest(
        trees=trees,
        config=config,
        feature_names=train.feature_names,
        target_names=train.target_names,
        feature_bounds=bounds,
    )


def evaluate_mae(forest: Forest, data) -> tuple[np.ndarray, float]:
    """Per-target mean absolute error and its average over targets."""
    if data.n < 1:
        raise ModelError("cannot evaluate on an empty dataset")
    preds = predict_batch(forest, data.features)
    per_target = np.abs(preds - data.targets).mean(axis=0)
    return per_target, float(per_target.mean())


def save(forest: Forest, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": {
            "n_estimators": forest.config.n_estimators,
            "max_depth": forest.config.max_depth,
            "min_samples_leaf": forest.config.min_samples_leaf,
            "max_features": forest.config.max_features,
            "bootstrap": forest.config.bootstrap,
            "seed": forest.config.seed,
            "normalize_targets": forest.config.normalize_targets,
        },
        "feature_names": list(forest.feature_names),
        "target_names": list(forest.target_names),
        "feature_bounds": forest.feature_bounds.tolist(),
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "value": tree.value.tolist(),
                "sample_count": tree.sample_count.tolist(),
            }
            for tree in forest.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load(path) -> Forest:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelError(f"{path}: corrupt model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelError(f"{path}: unsupported model version {doc.get('version')!r}")
    try:
        config = ForestConfig(**doc["config"])
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                value=np.asarray(t["value"], dtype=np.float64),
                sample_count=np.asarray(t["sample_count"], dtype=np.int64),
            )
            for t in doc["trees"]
        ]
        forest = Forest(
            trees=trees,
            config=config,
            feature_names=tuple(doc["feature_names"]),
            target_names=tuple(doc["target_names"]),
            feature_bounds=np.asarray(doc["feature_bounds"], dtype=np.float64),
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"{path}: corrupt model file ({exc})") from None
    if not forest.trees:
        raise ModelError(f"{path}: model has no trees")
    return forest
