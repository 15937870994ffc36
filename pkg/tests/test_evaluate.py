import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from upm.data import DataError, stratified_kfold
from upm.ensemble import PipelineConfig
from upm.evaluate import (ConfusionMatrix, accuracy, cross_validate, format_row, kappa, metrics,
                          weighted_f1)
from upm.learners import TrainConfig, ForestConfig

from helpers import pair_metrics, separable_cohort

FAST = PipelineConfig(train=TrainConfig(forest=ForestConfig(n_trees=10)))


@pytest.mark.parametrize("counts, acc", [([[50, 0], [0, 50]], 100.0), ([[40, 10], [10, 40]], 80.0),
                                         ([[10, 0], [0, 0]], 100.0)])
def test_accuracy_examples(counts, acc):
    assert accuracy(ConfusionMatrix(counts)) == acc


def test_weighted_f1_examples():
    assert weighted_f1(ConfusionMatrix([[40, 10], [10, 40]])) == pytest.approx(80.0)
    assert weighted_f1(ConfusionMatrix([[7, 0], [0, 3]])) == 100.0
    # class F1s 2/3 and 8/11 with weights 0.4 and 0.6
    assert weighted_f1(ConfusionMatrix([[30, 10], [20, 40]])) == pytest.approx(100 * (0.4 * 2 / 3 + 0.6 * 8 / 11))
    assert weighted_f1(ConfusionMatrix([[30, 10], [20, 40]])) == pytest.approx(70.30, abs=5e-3)


def test_kappa_examples():
    assert kappa(ConfusionMatrix([[50, 0], [0, 50]])) == 1.0
    assert kappa(ConfusionMatrix([[40, 10], [10, 40]])) == pytest.approx(0.6)
    assert kappa(ConfusionMatrix([[50, 0], [50, 0]])) == 0.0
    assert kappa(ConfusionMatrix([[9, 0], [0, 0]])) == 1.0


def test_empty_matrix_rejected():
    with pytest.raises(ValueError):
        accuracy(ConfusionMatrix([[0, 0], [0, 0]]))
    with pytest.raises(ValueError):
        ConfusionMatrix([[1, -1], [0, 0]])


def test_matrix_is_read_only_and_adds():
    a = ConfusionMatrix([[1, 2], [3, 4]])
    with pytest.raises(ValueError):
        a.counts[0, 0] = 9
    assert (a + a) == ConfusionMatrix([[2, 4], [6, 8]])
    assert ConfusionMatrix.from_pairs([0, 0, 1, 1, 1], [0, 1, 1, 1, 0]) == ConfusionMatrix([[1, 1], [1, 2]])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 60), min_size=4, max_size=4).filter(lambda c: sum(c) > 0))
def test_metrics_match_pair_oracle(c):
    cm = ConfusionMatrix(np.array(c).reshape(2, 2))
    actual = np.repeat([0, 0, 1, 1], c)
    predicted = np.repeat([0, 1, 0, 1], c)
    want = pair_metrics(actual, predicted)
    got = metrics(cm)
    for k in want:
        assert got[k] == pytest.approx(want[k], abs=1e-12)
    assert -1.0 <= got["kappa"] <= 1.0
    po = np.trace(cm.counts) / cm.n
    pe = (cm.counts.sum(1) * cm.counts.sum(0)).sum() / cm.n ** 2
    if pe < 1:
        assert got["kappa"] * (1 - pe) == pytest.approx(po - pe, abs=1e-12)


def test_format_row():
    assert format_row({"state": "X", "accuracy_pct": 90.12345, "f1_weighted_pct": 89.9, "kappa": 0.81234}) == \
        ["X", "90.123", "89.900", "0.8123"]


@pytest.fixture(scope="module")
def small_report():
    ds = separable_cohort(60, seed=5)
    return ds, cross_validate(ds, FAST.with_seed(3))


def test_report_internal_consistency(small_report):
    ds, rep = small_report
    assert rep.confusion.n == ds.n
    assert rep.confusion == ConfusionMatrix(sum(f.confusion.counts for f in rep.folds))
    tested = np.concatenate([f.test_indices for f in rep.folds])
    assert sorted(tested.tolist()) == list(range(ds.n))
    assert rep.accuracy_pct == accuracy(rep.confusion)
    pred = rep.predictions()
    assert (pred >= 0).all()
    assert rep.accuracy_pct == pytest.approx(100 * np.mean(pred == ds.labels))
    d = json.loads(rep.to_json())
    assert d["accuracy_pct"] == rep.accuracy_pct and len(d["folds"]) == 10
    assert rep.to_csv().splitlines()[0] == "state,accuracy_pct,f1_weighted_pct,kappa"


def test_fixed_seed_gives_identical_report(small_report):
    ds, rep = small_report
    assert cross_validate(ds, FAST.with_seed(3)).to_json() == rep.to_json()


def test_fold_workers_do_not_change_the_report(small_report):
    ds, rep = small_report
    assert cross_validate(ds, FAST.with_seed(3), workers=2).to_json() == rep.to_json()


def test_single_learner_and_global_prep_modes():
    ds = separable_cohort(50, seed=9)
    for learner in ("cart", "kstar"):
        assert cross_validate(ds, FAST, learner=learner).accuracy_pct >= 90
    g = PipelineConfig(train=FAST.train, global_prep=True)
    assert cross_validate(ds, g).accuracy_pct >= 90
    with pytest.raises(ValueError):
        cross_validate(ds, FAST, learner="svm")


def test_too_few_instances_or_single_class_split():
    ds = separable_cohort(8, seed=1)
    with pytest.raises(DataError):
        cross_validate(ds, PipelineConfig(folds=10))
    # one Unplaced instance: the fold that tests it trains on Placed only
    labels = np.zeros(12, dtype=int)
    labels[0] = 1
    lone = separable_cohort(12, seed=2).with_labels(labels)
    with pytest.raises(DataError, match="single class"):
        cross_validate(lone, PipelineConfig(folds=3))


def test_explicit_plan_is_used():
    ds = separable_cohort(40, seed=4)
    plan = stratified_kfold(ds, 4, 11)
    rep = cross_validate(ds, PipelineConfig(train=FAST.train, folds=4), plan=plan)
    assert rep.fold_sizes == plan.sizes().tolist()
