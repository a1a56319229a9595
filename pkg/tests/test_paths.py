from itertools import chain, combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build_forest, leaf, random_forest, split
from ruleforest import extract_paths, mine, predict, predict_tree, rank_features
from ruleforest.paths import AssociationModel, Path


def named_paths(feature_sets):
    """Paths carrying only feature sets, for mining tests."""
    return [
        Path(
            tree_index=i,
            conditions={f: (-np.inf, np.inf) for f in fs},
            leaf_prediction=np.zeros(1),
            leaf_id=0,
        )
        for i, fs in enumerate(feature_sets)
    ]


def brute_force_model(feature_sets, min_support):
    """Independent oracle: enumerate every itemset support directly, then
    apply the same pair/confidence definitions by exhaustive counting."""
    n = len(feature_sets)
    features = sorted(set(chain.from_iterable(feature_sets)))
    supports = {}
    for size in (1, 2):
        for combo in combinations(features, size):
            s = sum(1 for t in feature_sets if set(combo) <= set(t)) / n
            if size == 1 or s >= min_support:
                supports[frozenset(combo)] = s
    rules = []
    confs = {f: [] for f in features}
    for f, g in combinations(features, 2):
        pair = supports.get(frozenset((f, g)))
        if pair is None:
            continue
        for a, b in ((f, g), (g, f)):
            if supports[frozenset((a,))] > 0:
                c = pair / supports[frozenset((a,))]
                rules.append((a, b, c))
                confs[a].append(c)
    scores = {
        f: sum(c) / len(c) if c else supports[frozenset((f,))] for f, c in confs.items()
    }
    return supports, sorted(rules, key=lambda r: (r[0], r[1])), scores


# --- path extraction ---------------------------------------------------------


def test_single_split_condition():
    forest = build_forest([split(0, 5.0, leaf([1.0]), leaf([2.0]))], d=1)
    [path] = extract_paths(forest, [3.0])
    assert path.conditions == {0: (-np.inf, 5.0)}
    assert path.leaf_prediction == pytest.approx([1.0])


def test_nested_same_feature_tightens_both_bounds():
    # f0 <= 5 -> left, then f0 <= 2 -> right for x0 = 3: interval (2, 5]
    forest = build_forest(
        [split(0, 5.0, split(0, 2.0, leaf([1.0]), leaf([2.0])), leaf([3.0]))], d=1
    )
    [path] = extract_paths(forest, [3.0])
    assert path.conditions == {0: (2.0, 5.0)}


def test_untested_features_absent():
    forest = build_forest([split(1, 0.0, leaf([1.0]), leaf([2.0]))], d=3)
    [path] = extract_paths(forest, [5.0, -1.0, 5.0])
    assert set(path.conditions) == {1}


def test_paths_average_to_forest_prediction(rng):
    forest = random_forest(rng, n_trees=3, d=2, m=2, depth=3)
    x = rng.uniform(-5, 5, size=2)
    paths = extract_paths(forest, x)
    assert len(paths) == 3
    mean = np.vstack([p.leaf_prediction for p in paths]).mean(axis=0)
    np.testing.assert_allclose(mean, predict(forest, x), atol=1e-12)


def test_path_containment_and_leaf_change(rng):
    forest = random_forest(rng, n_trees=5, d=3, m=1, depth=4)
    x = rng.uniform(-8, 8, size=3)
    for path, tree in zip(extract_paths(forest, x), forest.trees):
        for f, (lo, hi) in path.conditions.items():
            assert lo < x[f] <= hi
            # stepping outside the interval must change the leaf
            if np.isfinite(hi):
                bumped = x.copy()
                bumped[f] = hi + 1e-6
                assert tree.leaf_for(bumped) != path.leaf_id
            if np.isfinite(lo):
                bumped = x.copy()
                bumped[f] = lo
                assert tree.leaf_for(bumped) != path.leaf_id
        np.testing.assert_array_equal(predict_tree(tree, x), path.leaf_prediction)


# --- mining ------------------------------------------------------------------


def test_mine_three_transactions():
    model = mine(named_paths([{0, 1}, {0, 1}, {0, 2}]), min_support=0.3)
    s = model.itemset_supports
    assert s[frozenset({0})] == pytest.approx(1.0)
    assert s[frozenset({0, 1})] == pytest.approx(2 / 3)
    conf = {(a, b): c for a, b, c in model.rules}
    assert conf[(0, 1)] == pytest.approx(2 / 3)
    assert conf[(1, 0)] == pytest.approx(1.0)
    assert conf[(2, 0)] == pytest.approx(1.0)
    assert model.feature_scores[0] == pytest.approx(0.5)  # mean of 2/3 and 1/3
    assert model.feature_scores[1] == pytest.approx(1.0)


def test_mine_identical_transactions_symmetric():
    model = mine(named_paths([{0, 1, 2}] * 4), min_support=0.1)
    assert all(c == pytest.approx(1.0) for _, _, c in model.rules)
    assert len(set(round(v, 12) for v in model.feature_scores.values())) == 1


def test_mine_single_feature_fallback():
    model = mine(named_paths([{3}]), min_support=0.1)
    assert model.rules == []
    assert model.feature_scores[3] == pytest.approx(1.0)


def test_mine_empty_transactions():
    model = mine(named_paths([set(), set()]), min_support=0.1)
    assert model.itemset_supports == {}
    assert model.feature_scores == {}


def test_mine_requires_paths():
    with pytest.raises(ValueError):
        mine([], min_support=0.1)


@settings(max_examples=60, deadline=None)
@given(
    data=st.lists(
        st.frozensets(st.integers(min_value=0, max_value=5), max_size=6),
        min_size=1,
        max_size=32,
    ),
    min_support=st.floats(min_value=0.05, max_value=1.0),
)
def test_mine_matches_brute_force(data, min_support):
    model = mine(named_paths(data), min_support=min_support)
    supports, rules, scores = brute_force_model(data, min_support)
    assert set(model.itemset_supports) == set(supports)
    for key, value in supports.items():
        assert model.itemset_supports[key] == pytest.approx(value, abs=1e-12)
    assert [(a, b) for a, b, _ in model.rules] == [(a, b) for a, b, _ in rules]
    for (_, _, got), (_, _, want) in zip(model.rules, rules):
        assert got == pytest.approx(want, abs=1e-12)
    assert set(model.feature_scores) == set(scores)
    for f in scores:
        assert model.feature_scores[f] == pytest.approx(scores[f], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    data=st.lists(
        st.frozensets(st.integers(min_value=0, max_value=7), min_size=1, max_size=6),
        min_size=1,
        max_size=20,
    )
)
def test_pair_support_antimonotone(data):
    model = mine(named_paths(data), min_support=0.01)
    for itemset, support in model.itemset_supports.items():
        if len(itemset) == 2:
            for f in itemset:
                assert support <= model.itemset_supports[frozenset({f})] + 1e-12


# --- ranking -----------------------------------------------------------------


def scored(scores):
    return AssociationModel(feature_scores=scores)


def test_rank_ascending():
    assert rank_features(scored({0: 0.9, 1: 0.4, 2: 0.4})) == [1, 2, 0]


def test_rank_descending():
    assert rank_features(scored({0: 0.9, 1: 0.4, 2: 0.4}), "descending") == [0, 1, 2]


def test_rank_all_equal_is_index_order():
    assert rank_features(scored({2: 0.5, 0: 0.5, 1: 0.5})) == [0, 1, 2]


def test_rank_is_permutation(rng):
    forest = random_forest(rng, n_trees=6, d=4, m=1, depth=4)
    paths = extract_paths(forest, rng.uniform(-5, 5, size=4))
    model = mine(paths, 0.1)
    present = set().union(*(p.feature_set for p in paths))
    assert sorted(rank_features(model)) == sorted(present)
