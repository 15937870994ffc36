import csv
import io

import numpy as np
import pytest

from upm.data import DataError
from upm.ensemble import PipelineConfig, train_upm
from upm.learners import CartConfig, ForestConfig, TrainConfig, train_cart, train_random_tree
from upm.learners.tree import LEAF, TreeModel
from upm.preprocess import apply_transform
from upm.rules import extract_rules, format_rules, rules_for_model
from upm.synthgen import CohortSpec, generate_cohort

from helpers import numeric_dataset, separable_cohort


def stump_on(ds, threshold=0.5):
    return TreeModel(np.array([0, LEAF, LEAF]), np.array([threshold, np.nan, np.nan]), [None] * 3,
                     np.array([1, LEAF, LEAF]), np.array([2, LEAF, LEAF]),
                     np.array([[3, 3], [3, 0], [0, 3]], dtype=float), ds.n_attributes)


def test_single_leaf_gives_the_unconditional_rule():
    ds = numeric_dataset(np.arange(5.0), [0] * 5)
    rs = extract_rules(train_cart(ds), ds)
    assert len(rs) == 1
    assert rs.rules[0].conditions == ()
    assert format_rules(rs) == "IF TRUE THEN Placed  [coverage=5, confidence=1.0000]\n"


def test_stump_gives_complementary_rules():
    ds = numeric_dataset([0.1, 0.2, 0.3, 0.7, 0.8, 0.9], [0, 0, 0, 1, 1, 1])
    rs = extract_rules(stump_on(ds), ds)
    texts = sorted(r.condition_text() for r in rs)
    assert texts == ["x0 <= 0.5", "x0 > 0.5"]
    assert sum(r.coverage for r in rs) == ds.n
    assert all(r.confidence == 1.0 for r in rs)


def test_repeated_tests_collapse_to_an_interval():
    ds = numeric_dataset(np.linspace(0, 1, 12), [0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1])
    t = train_cart(ds, TrainConfig(cart=CartConfig(min_leaf=1, prune=False)))
    rs = extract_rules(t, ds)
    for r in rs:
        assert len(r.conditions) == 1
        assert r.condition_text().count("x0 >") <= 1 and r.condition_text().count("x0 <=") <= 1


def test_categorical_conditions_render_by_name():
    ds = separable_cohort(80, seed=4)
    t = train_cart(ds, TrainConfig(cart=CartConfig(min_leaf=1, prune=False)))
    text = format_rules(extract_rules(t, ds))
    assert "Signal" in text
    if "Group" in text:
        assert any(s in text for s in ("Group = ", "Group != ", "Group in "))


@pytest.fixture(scope="module")
def cohort():
    return generate_cohort(CohortSpec("Rule State", 300, seed=5, missing_rate=0.0))[0]


@pytest.fixture(scope="module")
def trees(cohort):
    cfg = TrainConfig(seed=3, cart=CartConfig(min_leaf=1, prune=False))
    return cohort, [train_cart(cohort, cfg), train_random_tree(cohort, cfg)]


def test_fidelity_partition_and_coverage(trees):
    ds, ts = trees
    rng = np.random.default_rng(0)
    fuzz = rng.uniform(ds.values.min(axis=0) - 1, ds.values.max(axis=0) + 1, size=(10_000, ds.n_attributes))
    for a in ds.attributes:
        if not a.is_numeric:
            fuzz[:, a.index] = rng.integers(0, len(a.categories), fuzz.shape[0])
    for t in ts:
        rs = extract_rules(t, ds)
        assert len(rs) == t.n_leaves
        assert sum(r.coverage for r in rs) == ds.n
        for X in (ds.values, fuzz):
            assert (rs.match_matrix(X).sum(axis=1) == 1).all()
            assert np.array_equal(rs.classify(X), np.argmax(t.predict_proba(X), axis=1))
        for r in rs:
            assert 0.0 <= r.confidence <= 1.0 and r.coverage >= 1


def test_rules_are_ordered_by_weighted_confidence(trees):
    ds, ts = trees
    keys = [r.confidence * r.coverage for r in extract_rules(ts[0], ds)]
    assert keys == sorted(keys, reverse=True)


def test_rendering_is_deterministic_in_every_style(trees):
    ds, ts = trees
    for style in ("text", "markdown", "csv"):
        assert format_rules(extract_rules(ts[0], ds), style) == format_rules(extract_rules(ts[0], ds), style)
    with pytest.raises(ValueError):
        format_rules(extract_rules(ts[0], ds), "html")


def test_csv_columns(trees):
    ds, ts = trees
    rs = extract_rules(ts[0], ds)
    rows = list(csv.reader(io.StringIO(format_rules(rs, "csv"))))
    assert rows[0] == ["rule_id", "conditions", "class", "coverage", "confidence"]
    assert len(rows) == len(rs) + 1
    assert [int(r[0]) for r in rows[1:]] == list(range(1, len(rs) + 1))


def test_text_layout(trees):
    ds, ts = trees
    for line in format_rules(extract_rules(ts[0], ds)).splitlines():
        assert line.startswith("IF ") and " THEN " in line and "  [coverage=" in line


def test_schema_mismatch():
    ds = numeric_dataset(np.zeros((4, 2)) + np.arange(4)[:, None], [0, 1, 0, 1])
    other = numeric_dataset(np.arange(4.0), [0, 1, 0, 1])
    with pytest.raises(DataError):
        extract_rules(stump_on(ds), other)


def test_rules_from_an_ensemble_print_raw_units(cohort):
    m = train_upm(cohort, PipelineConfig(train=TrainConfig(forest=ForestConfig(n_trees=3))))
    reduced = apply_transform(m.transform, cohort)
    (rs,) = rules_for_model(m, reduced)
    assert sum(r.coverage for r in rs) == cohort.n
    assert np.array_equal(rs.classify(reduced.values), np.argmax(m.cart.predict_proba(reduced.values), axis=1))
    assert len(rules_for_model(m, reduced, "forest")) == 3
    with pytest.raises(ValueError):
        rules_for_model(m, reduced, "kstar")
    # scaled thresholds lie in [0, 1]; raw ones in the attribute's own range
    for r in rs:
        for c in r.conditions:
            if c.is_numeric and c.raw is not None and np.isfinite(c.upper):
                j = m.transform.kept[c.attribute]
                raw_col = cohort.values[~cohort.missing[:, j], j]
                shown = c.raw[0] + c.upper * c.raw[1]
                assert raw_col.min() <= shown <= raw_col.max()
