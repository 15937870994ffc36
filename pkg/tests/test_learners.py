import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from upm.data import CATEGORICAL, AttributeDescriptor, Dataset
from upm.learners import (CartConfig, ForestConfig, ForestModel, KStarConfig, KStarModel, LearnerError,
                          RandomTreeConfig, TrainConfig, TreeModel, gini, kstar_predict, predict_tree,
                          pruning_sequence, train_cart, train_kstar, train_random_forest, train_random_tree)
from upm.learners.forest import member_seed
from upm.learners.tree import LEAF

from helpers import numeric_dataset, separable_cohort

UNPRUNED = TrainConfig(cart=CartConfig(min_leaf=1, prune=False), rtree=RandomTreeConfig(min_leaf=1))


def test_gini_examples():
    assert gini([5, 5]) == 0.5
    assert gini([10, 0]) == 0.0
    assert gini([3, 1]) == pytest.approx(0.375)
    with pytest.raises(ValueError):
        gini([0, 0])


def test_single_class_gives_single_leaf():
    ds = numeric_dataset(np.arange(6.0), [1] * 6)
    for t in (train_cart(ds), train_random_tree(ds)):
        assert t.n_nodes == 1
        assert t.predict_proba(np.array([[100.0]])).tolist() == [[0.0, 1.0]]
    f = train_random_forest(ds, TrainConfig(forest=ForestConfig(n_trees=5)))
    assert all(t.n_nodes == 1 for t in f.trees)
    assert f.predict_proba(np.array([[0.0]])).tolist() == [[0.0, 1.0]]


def test_perfect_one_dimensional_split():
    x = np.array([0.1, 0.2, 0.3, 0.7, 0.8, 0.9])
    ds = numeric_dataset(x, [0, 0, 0, 1, 1, 1])
    t = train_cart(ds, UNPRUNED)
    assert t.feature[0] == 0 and 0.3 < t.threshold[0] < 0.7
    assert t.threshold[0] == pytest.approx(0.5)
    assert (np.argmax(t.predict_proba(x[:, None]), axis=1) == ds.labels).all()


def test_xor_needs_depth_two():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    ds = numeric_dataset(X, [0, 1, 1, 0])
    t = train_cart(ds, UNPRUNED)
    assert t.depth == 2
    assert (np.argmax(t.predict_proba(X), axis=1) == ds.labels).all()


def test_random_tree_with_every_attribute_matches_greedy_cart():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 3))
    y = np.array([0, 1, 0, 1, 1, 0, 0, 1, 1, 0])
    ds = numeric_dataset(X, y)
    cfg = TrainConfig(cart=CartConfig(min_leaf=1, prune=False), rtree=RandomTreeConfig(k_attrs=3, min_leaf=1))
    a, b = train_cart(ds, cfg), train_random_tree(ds, cfg)
    assert np.array_equal(a.feature, b.feature)
    assert np.allclose(a.threshold, b.threshold, equal_nan=True)
    assert np.array_equal(a.apply(X), b.apply(X))


def test_random_tree_seeds_give_valid_trees():
    ds = separable_cohort(40, seed=1)
    for seed in (1, 2):
        t = train_random_tree(ds, UNPRUNED.with_seed(seed))
        internal = t.feature != LEAF
        assert np.all((t.left[internal] > 0) & (t.right[internal] > 0))
        assert np.allclose(t.leaf_distributions()[~internal].sum(axis=1), 1.0)


def test_degenerate_forest_is_one_random_tree():
    ds = separable_cohort(30, seed=2)
    cfg = TrainConfig(seed=9, forest=ForestConfig(n_trees=1, bootstrap=False))
    f = train_random_forest(ds, cfg)
    t = train_random_tree(ds, cfg.with_seed(member_seed(9, 0)))
    assert np.array_equal(f.trees[0].feature, t.feature)
    assert np.array_equal(f.predict_proba(ds.values), t.predict_proba(ds.values))


def test_forest_is_deterministic_tree_by_tree():
    ds = separable_cohort(50, seed=3)
    cfg = TrainConfig(seed=4, forest=ForestConfig(n_trees=8))
    a, b = train_random_forest(ds, cfg), train_random_forest(ds, cfg)
    assert a.seeds == b.seeds
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def stump(threshold, left, right, n_attributes=1):
    return TreeModel(np.array([0, LEAF, LEAF]), np.array([threshold, np.nan, np.nan]), [None] * 3,
                     np.array([1, LEAF, LEAF]), np.array([2, LEAF, LEAF]),
                     np.array([[sum(left), sum(right)], left, right], dtype=float), n_attributes)


def test_routing_through_a_stump():
    t = stump(0.5, [4, 0], [0, 3])
    assert predict_tree(t, [0.3]).tolist() == [1.0, 0.0]
    assert predict_tree(t, [0.5]).tolist() == [1.0, 0.0]
    assert predict_tree(t, [0.51]).tolist() == [0.0, 1.0]


def test_forest_averages_member_distributions():
    trees = [stump(0.5, [1, 0], [0, 1]), stump(0.5, [2, 0], [0, 2]), stump(0.1, [1, 0], [0, 1])]
    f = ForestModel(trees, [0, 1, 2])
    assert predict_tree(f, [0.3]) == pytest.approx([2 / 3, 1 / 3])


def test_missing_cells_and_tiny_data_rejected():
    ds = Dataset((AttributeDescriptor("a", "numeric", 0),), [[1.0], [2.0]], [[True], [False]], [0, 1])
    with pytest.raises(LearnerError):
        train_cart(ds)
    with pytest.raises(LearnerError):
        train_cart(numeric_dataset([[1.0]], [0]))


def no_contradictions(X, y):
    seen = {}
    for row, label in zip(map(tuple, X), y):
        if seen.setdefault(row, label) != label:
            return False
    return True


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(4, 32))
def test_unpruned_trees_fit_consistent_data_exactly(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, 3)).astype(float)
    y = rng.integers(0, 2, n)
    if not no_contradictions(X, y) or len(set(y)) < 2:
        return
    ds = numeric_dataset(X, y)
    for t in (train_cart(ds, UNPRUNED), train_random_tree(ds, UNPRUNED.with_seed(seed))):
        assert (np.argmax(t.predict_proba(X), axis=1) == y).all()
        p = t.predict_proba(X)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12) and (p >= 0).all()


def test_pruning_sequence_is_monotone_and_nested():
    ds = separable_cohort(120, seed=5, noise_attrs=6)
    noisy = ds.with_labels(np.where(np.random.default_rng(1).random(ds.n) < 0.15, 1 - ds.labels, ds.labels))
    grown = train_cart(noisy, UNPRUNED)
    seq = pruning_sequence(grown)
    alphas = [s.alpha for s in seq]
    assert alphas == sorted(alphas) and alphas[0] == 0.0
    leaves = [s.n_leaves for s in seq]
    assert all(a > b for a, b in zip(leaves, leaves[1:])) and leaves[-1] == 1
    for a, b in zip(seq, seq[1:]):
        assert np.all(b.terminal >= a.terminal)
    pruned = train_cart(noisy, TrainConfig())
    assert pruned.n_leaves <= grown.n_leaves
    grown_splits = {(int(f), float(th)) for f, th in zip(grown.feature, grown.threshold) if f != LEAF}
    assert {(int(f), float(th)) for f, th in zip(pruned.feature, pruned.threshold) if f != LEAF} <= grown_splits


def test_monotone_transform_keeps_the_root_partition():
    rng = np.random.default_rng(6)
    X = rng.uniform(0.1, 3, size=(60, 3))
    y = (X[:, 1] + 0.3 * rng.normal(size=60) > 1.5).astype(int)
    a = train_cart(numeric_dataset(X, y), UNPRUNED)
    b = train_cart(numeric_dataset(np.exp(X) ** 3, y), UNPRUNED)
    assert a.feature[0] == b.feature[0]
    j = a.feature[0]
    assert np.array_equal(X[:, j] <= a.threshold[0], (np.exp(X) ** 3)[:, j] <= b.threshold[0])


def test_categorical_split_is_one_category_versus_rest():
    attrs = (AttributeDescriptor("g", CATEGORICAL, 0, ("a", "b", "c")),)
    X = np.array([[0], [0], [1], [1], [2], [2]], dtype=float)
    ds = Dataset(attrs, X, np.zeros(X.shape, bool), [0, 0, 1, 1, 1, 1])
    t = train_cart(ds, UNPRUNED)
    assert t.predicate(0).categories == (0,)


def test_tree_json_round_trip():
    ds = separable_cohort(40, seed=7)
    t = train_cart(ds)
    back = TreeModel.from_dict(json.loads(json.dumps(t.to_dict())))
    assert np.array_equal(back.predict_proba(ds.values), t.predict_proba(ds.values))


# -- K* ----------------------------------------------------------------------

def eight_instances():
    X = np.array([[0.0, 0.1], [0.2, 0.9], [0.4, 0.3], [0.5, 0.5],
                  [0.6, 0.2], [0.7, 0.8], [0.9, 0.6], [1.0, 0.0]])
    y = np.array([0, 0, 0, 1, 0, 1, 1, 1])
    return numeric_dataset(X, y)


def test_kstar_minimum_blend_is_nearest_neighbour():
    ds = eight_instances()
    m = train_kstar(ds, TrainConfig(kstar=KStarConfig(blend=1e-9)))
    for i in range(ds.n):
        p = kstar_predict(m, ds.values[i])
        assert p[ds.labels[i]] == pytest.approx(1.0, abs=1e-9)


def test_kstar_full_blend_returns_class_priors():
    ds = eight_instances()
    m = train_kstar(ds, TrainConfig(kstar=KStarConfig(blend=100)))
    prior = np.bincount(ds.labels) / ds.n
    for x in np.random.default_rng(0).uniform(-1, 2, size=(20, 2)):
        assert kstar_predict(m, x) == pytest.approx(prior, abs=1e-9)


def test_kstar_symmetric_training_set():
    ds = numeric_dataset([[-2.0], [-1.0], [1.0], [2.0]], [0, 0, 1, 1])
    m = train_kstar(ds)
    assert kstar_predict(m, [0.0]) == pytest.approx([0.5, 0.5], abs=1e-12)
    assert kstar_predict(m, [-0.5])[0] > 0.5


def test_kstar_solver_hits_the_effective_count():
    rng = np.random.default_rng(8)
    ds = numeric_dataset(rng.normal(size=(60, 4)), rng.integers(0, 2, 60))
    m = train_kstar(ds)
    p, diag = m.predict_proba(rng.normal(size=(20, 4)), diagnostics=True)
    assert diag["flagged"] == 0 and diag["max_gap"] < 1e-6
    assert diag["target"] == pytest.approx(1 + 0.2 * 59)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_kstar_flags_a_category_too_common_to_tune():
    # 20 of 60 instances share each category, above the target of 12.8, so the
    # match probability is clamped and the shortfall is reported
    ds = separable_cohort(60, seed=8)
    p, diag = train_kstar(ds).predict_proba(ds.values[:5], diagnostics=True)
    assert diag["flagged"] == 5 and diag["max_gap"] > 1e-6
    assert np.all(np.isfinite(p))


def test_kstar_rejects_bad_blend_and_round_trips():
    with pytest.raises(ValueError):
        TrainConfig(kstar=KStarConfig(blend=0))
    ds = eight_instances()
    m = train_kstar(ds)
    back = KStarModel.from_dict(json.loads(json.dumps(m.to_dict())))
    assert np.array_equal(back.predict_proba(ds.values), m.predict_proba(ds.values))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(forest=ForestConfig(n_trees=0))
    with pytest.raises(ValueError):
        TrainConfig(cart=CartConfig(prune_folds=1))
    assert RandomTreeConfig().resolve_k(150) == 8
    assert TrainConfig.from_dict(TrainConfig().to_dict()) == TrainConfig()
