import json

import numpy as np
import pytest

from upm.data import load_csv
from upm.ensemble import MEMBERS, PipelineConfig, train_upm
from upm.learners import ForestConfig, TrainConfig
from upm.preprocess import apply_transform
from upm.synthgen import (INFORMATIVE, TABLE1, CohortSpec, GeneratorError, bayes_accuracy, generate_cohort,
                          solve_intercept, systematic_draw, table1_suite, write_cohort)

from helpers import separable_spec

FAST = PipelineConfig(train=TrainConfig(forest=ForestConfig(n_trees=10)))
SIZES = [516, 411, 439, 460, 440, 350, 425, 310, 261, 344, 958, 453, 178, 287, 1192, 104, 32]


def test_uttarakhand_shape():
    ds, truth = generate_cohort(CohortSpec("Uttarakhand", 104))
    assert ds.n == 104 and ds.n_attributes == 150
    assert set(INFORMATIVE) <= set(ds.attribute_names)
    assert len(set(ds.attribute_names)) == 150
    assert 50.0 <= truth.bayes_accuracy <= 100.0


def test_same_seed_same_cohort():
    spec = CohortSpec("Kerala", 261, seed=7)
    a, ta = generate_cohort(spec)
    b, tb = generate_cohort(spec)
    assert a == b and ta.to_dict() == tb.to_dict()
    c, _ = generate_cohort(CohortSpec("Kerala", 261, seed=8))
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("rate", [0.35, 0.5, 0.8])
def test_no_signal_means_majority_rate(rate):
    assert bayes_accuracy(0.0, rate) == pytest.approx(100 * max(rate, 1 - rate), abs=1.0)


def test_default_strength_targets_ninety_percent():
    assert bayes_accuracy(2.684, 0.35) == pytest.approx(90.0, abs=0.3)


def test_intercept_bisection():
    s = np.random.default_rng(0).standard_normal(5000)
    c = solve_intercept(s, 1.5, 0.3)
    assert np.mean(0.5 * (1 + np.tanh(0.5 * (1.5 * s + c)))) == pytest.approx(0.3, abs=1e-9)


def test_spec_validation():
    for bad in (dict(n_instances=1), dict(signal_strength=-1), dict(positive_rate=1.0),
                dict(missing_rate=1.0), dict(informative=("Height",)), dict(link="max")):
        kwargs = dict(state="X", n_instances=10) | bad
        with pytest.raises(GeneratorError):
            CohortSpec(**kwargs)


def test_suite_sizes_and_distinct_seeds():
    assert [n for _, n in TABLE1] == SIZES
    suite = table1_suite(42)
    assert len(suite) == 17
    assert [ds.n for ds, _ in suite] == SIZES
    assert suite[-1][0].name == "West Bengal" and suite[-1][0].n == 32
    assert len({t.seed for _, t in suite}) == 17
    for ds, t in suite:
        assert abs(100 * t.realized_positive_rate - 35.0) <= 3.0, ds.name
        # systematic draws put the count within one student of the target
        assert abs(t.realized_positive_rate * ds.n - 0.35 * ds.n) < 1.0 + 1e-9, ds.name


def test_systematic_draw_keeps_each_marginal():
    p = np.array([0.05, 0.2, 0.5, 0.9, 0.4, 1.0, 0.0])
    rng = np.random.default_rng(0)
    draws = np.array([systematic_draw(p, rng) for _ in range(40_000)])
    # binomial standard error is at most 0.0025; allow four of them
    assert np.abs(draws.mean(axis=0) - p).max() < 0.01
    counts = draws.sum(axis=1)
    assert counts.min() >= np.floor(p.sum()) and counts.max() <= np.ceil(p.sum())


def test_labels_ignore_nuisance_columns():
    a, _ = generate_cohort(CohortSpec("Punjab", 300, seed=3))
    b, _ = generate_cohort(CohortSpec("Punjab", 300, seed=3, missing_rate=0.2))
    assert np.array_equal(a.labels, b.labels)
    for name in INFORMATIVE:
        j = a.attribute_names.index(name)
        seen = ~b.missing[:, j]
        assert np.array_equal(a.values[seen, j], b.values[seen, j])


def test_near_duplicates_are_highly_correlated():
    ds, _ = generate_cohort(CohortSpec("Delhi", 460, seed=2, missing_rate=0.0))
    names = ds.attribute_names
    pairs = [("SemAvg_Pct", "SemAvg_GPA"), ("WorkingMemory_Scaled", "WorkingMemory"),
             ("Motivation_Scaled", "Motivation"), ("HomeDistanceMiles_Inv", "HomeDistanceKm_Inv")]
    for dup, src in pairs:
        r = np.corrcoef(ds.values[:, names.index(dup)], ds.values[:, names.index(src)])[0, 1]
        assert abs(r) >= 0.95, dup


def test_truth_file_round_trip(tmp_path):
    ds, truth = generate_cohort(CohortSpec("West Bengal", 32, seed=4))
    path = write_cohort(ds, truth, tmp_path)
    assert load_csv(path, name="West Bengal").n == 32
    saved = json.loads((tmp_path / "west_bengal.truth.json").read_text())
    assert saved["informative"] == list(INFORMATIVE)
    assert set(saved["coefficients"]) == set(INFORMATIVE)
    assert 0.0 <= saved["realized_bayes_accuracy"] <= 100.0


@pytest.fixture(scope="module")
def strong():
    return generate_cohort(separable_spec())


def test_strong_signal_members_fit_training_data(strong):
    ds, truth = strong
    assert truth.realized_bayes_accuracy > 97
    m = train_upm(ds, FAST)
    X = apply_transform(m.transform, ds).values
    for name in MEMBERS:
        acc = np.mean(np.argmax(m.members[name].predict_proba(X), axis=1) == ds.labels)
        assert acc >= 0.95, name
