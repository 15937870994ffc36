import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from upm.data import CATEGORICAL, NUMERIC, AttributeDescriptor, Dataset
from upm.preprocess import (DROP_ROW, CleanConfig, PreprocessError, PrepConfig, Transform,
                            apply_transform, association_matrix, clean, cluster_attributes, fit_preprocessing,
                            kmedoids, label_relevance, select_and_transform, silhouette)
from upm.synthgen import INFORMATIVE, CohortSpec, generate_cohort

from helpers import numeric_dataset


def with_missing(X, miss, y, kinds=None, cats=None):
    X = np.asarray(X, dtype=float)
    kinds = kinds or [NUMERIC] * X.shape[1]
    attrs = tuple(AttributeDescriptor(f"a{j}", k, j, (cats or {}).get(j, ())) for j, k in enumerate(kinds))
    return Dataset(attrs, X, np.asarray(miss, bool), np.asarray(y))


def test_constant_attribute_is_dropped():
    ds = numeric_dataset([[1, 5], [2, 5], [3, 5]], [0, 1, 0])
    out, t = clean(ds)
    assert out.attribute_names == ["x0"] and t.kept == (0,)


def test_median_imputation_then_scaling():
    ds = with_missing([[2, 0], [0, 1], [6, 2]], [[0, 0], [1, 0], [0, 0]], [0, 1, 0])
    out, t = clean(ds)
    assert t.impute[0] == 4.0
    # {2, 4, 6} scaled to [0, 1]
    assert out.values[:, 0].tolist() == [0.0, 0.5, 1.0]


def test_mode_imputation_for_categories():
    ds = with_missing([[0], [1], [1], [0]], [[0], [0], [0], [1]], [0, 1, 0, 1],
                      kinds=[CATEGORICAL], cats={0: ("a", "b")})
    out, t = clean(ds)
    assert t.impute == (1.0,) and out.values[3, 0] == 1.0


def test_zero_missing_tolerance_drops_any_gappy_column():
    ds = with_missing([[1, 1], [2, 2], [3, 3]], [[0, 1], [0, 0], [0, 0]], [0, 1, 0])
    out, _ = clean(ds, CleanConfig(max_missing_fraction=0.0))
    assert out.attribute_names == ["a0"]


def test_drop_row_mode_and_its_errors():
    ds = with_missing([[1, 1], [2, 2], [3, 3]], [[0, 1], [0, 0], [0, 0]], [0, 1, 0])
    out, _ = clean(ds, CleanConfig(impute=DROP_ROW))
    assert out.n == 2
    gappy = with_missing([[1, 1], [2, 2]], [[1, 0], [0, 1]], [0, 1])
    with pytest.raises(PreprocessError):
        clean(gappy, CleanConfig(impute=DROP_ROW))
    const = numeric_dataset([[1], [1]], [0, 1])
    with pytest.raises(PreprocessError):
        clean(const)


def test_clean_config_bounds():
    with pytest.raises(ValueError):
        CleanConfig(max_missing_fraction=1.5)
    with pytest.raises(ValueError):
        CleanConfig(impute="mean")


def test_duplicate_columns_share_a_cluster():
    rng = np.random.default_rng(0)
    x = rng.normal(size=80)
    other = rng.normal(size=80)
    y = (x + 0.3 * rng.normal(size=80) > 0).astype(int)
    ds = numeric_dataset(np.column_stack([x, 2 * x + 1, other]), y)
    acs = cluster_attributes(ds, seed=1)
    assert acs.k_used == 2
    assert (0, 1) in acs.clusters
    reduced, _ = select_and_transform(ds, acs)
    assert reduced.n_attributes == 2
    assert len({"x0", "x1"} & set(reduced.attribute_names)) == 1


def test_association_matrix_by_direct_computation():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 3))
    ds = numeric_dataset(X, rng.integers(0, 2, 50))
    want = np.abs(np.corrcoef(X.T))
    assert np.allclose(association_matrix(ds), want, atol=1e-12)


def test_single_cluster_keeps_the_most_relevant_attribute():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 100)
    X = np.column_stack([rng.normal(size=100), y + 0.2 * rng.normal(size=100), rng.normal(size=100)])
    ds = numeric_dataset(X, y)
    acs = cluster_attributes(ds, k=1)
    assert acs.clusters == ((0, 1, 2),) and acs.representatives == (1,)


def test_strong_cluster_mate_beats_weak_one():
    rng = np.random.default_rng(3)
    n = 400
    y = rng.integers(0, 2, n)
    strong = y + 0.35 * rng.normal(size=n)
    weak = strong + 1.2 * rng.normal(size=n)      # correlated with strong, weakly with the label
    noise = rng.normal(size=(n, 2))
    ds = numeric_dataset(np.column_stack([weak, strong, noise]), y)
    rel = label_relevance(ds)
    assert rel[1] > 0.8 and rel[0] < rel[1]
    acs = cluster_attributes(ds, k=3, seed=0)
    cluster = next(c for c in acs.clusters if 1 in c)
    assert 1 in acs.representatives and (0 not in cluster or 0 not in acs.representatives)


def test_identity_selection_when_every_attribute_is_a_cluster():
    ds = numeric_dataset(np.random.default_rng(4).normal(size=(20, 4)), [0, 1] * 10)
    acs = cluster_attributes(ds, k=4)
    out, t = select_and_transform(ds, acs)
    assert out.attribute_names == ds.attribute_names and t.kept == (0, 1, 2, 3)


def test_cluster_argument_errors():
    ds = numeric_dataset(np.random.default_rng(5).normal(size=(10, 3)), [0, 1] * 5)
    with pytest.raises(PreprocessError):
        cluster_attributes(ds, k=4)
    with pytest.raises(PreprocessError):
        cluster_attributes(numeric_dataset(np.arange(4.0), [0, 1, 0, 1]))
    other = numeric_dataset(np.zeros((10, 3)) + np.arange(10)[:, None], [0, 1] * 5, names=["p", "q", "r"])
    with pytest.raises(PreprocessError):
        select_and_transform(other, cluster_attributes(ds, k=2))


@pytest.fixture(scope="module")
def cohort():
    return generate_cohort(CohortSpec("Prep State", 300, seed=11, missing_rate=0.02))[0]


@pytest.fixture(scope="module")
def fitted(cohort):
    return fit_preprocessing(cohort, PrepConfig(), seed=5)


def test_fit_time_output_equals_reapplication(cohort, fitted):
    reduced, t, acs = fitted
    again = apply_transform(t, cohort)
    assert np.array_equal(again.values, reduced.values)
    assert again.attribute_names == reduced.attribute_names
    # applying to its own output is a no-op
    assert apply_transform(t, reduced) is reduced


def test_cluster_invariants(fitted):
    reduced, t, acs = fitted
    flat = sorted(j for c in acs.clusters for j in c)
    assert flat == list(range(len(acs.attribute_names)))
    assert len(acs.representatives) == acs.k_used == len(set(acs.representatives))
    for c, r in zip(acs.clusters, acs.representatives):
        assert r in c
    assert np.all(np.isfinite(acs.relevance))
    assert reduced.n_attributes == acs.k_used


def test_clustering_is_deterministic(cohort, fitted):
    _, t2, acs2 = fit_preprocessing(cohort, PrepConfig(), seed=5)
    assert acs2.clusters == fitted[2].clusters and t2 == fitted[1]


def test_planted_anchors_survive(fitted):
    assert set(INFORMATIVE) <= set(fitted[0].attribute_names)


def test_heldout_rows_clip_and_impute(cohort, fitted):
    _, t, _ = fitted
    j_raw = t.kept[0]
    assert cohort.attributes[j_raw].is_numeric
    lo, hi = t.scale[0]
    values = np.array(cohort.values[:2])
    missing = np.array(cohort.missing[:2])
    values[0, j_raw] = hi + 100.0
    missing[0, :] = False
    missing[1, j_raw] = True
    fresh = Dataset(cohort.attributes, values, missing, cohort.labels[:2])
    out = apply_transform(t, fresh)
    assert out.values[0, 0] == 1.0
    assert out.values[1, 0] == pytest.approx((t.impute[0] - lo) / (hi - lo))
    assert not out.has_missing()


def test_transform_json_round_trip(fitted):
    t = fitted[1]
    d = json.loads(json.dumps(t.to_dict()))
    assert {"kept", "impute", "scale", "version"} <= set(d)
    assert Transform.from_dict(d) == t


def test_schema_mismatch_rejected(fitted):
    t = fitted[1]
    with pytest.raises(PreprocessError):
        apply_transform(t, numeric_dataset(np.zeros((2, 3)), [0, 1]))


def test_silhouette_and_kmedoids_on_obvious_blocks():
    # two tight blocks of attributes far apart
    d = np.full((6, 6), 0.9)
    d[:3, :3] = d[3:, 3:] = 0.1
    np.fill_diagonal(d, 0.0)
    labels = kmedoids(d, 2, seed=0)
    assert len(set(labels[:3])) == 1 and len(set(labels[3:])) == 1 and labels[0] != labels[3]
    assert silhouette(d, labels) == pytest.approx(1 - 0.1 / 0.9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 9))
def test_representatives_are_distinct_members(seed, n_attr):
    rng = np.random.default_rng(seed)
    ds = numeric_dataset(rng.normal(size=(30, n_attr)), rng.integers(0, 2, 30))
    acs = cluster_attributes(ds, seed=seed)
    assert len(set(acs.representatives)) == acs.k_used
    assert all(r in c for c, r in zip(acs.clusters, acs.representatives))
