"""Stratified cross-validation of the full pipeline and its three indicators.

Accuracy, weighted F1 and kappa are all computed from a 2x2 confusion matrix
whose rows are actual classes and columns predicted classes.  The report's
headline numbers come from the matrix pooled over folds; per-fold values are
kept alongside for dispersion.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .data import CLASSES, DataError, Dataset, FoldPlan, stratified_kfold
from .ensemble import MEMBERS, PipelineConfig, combine_batch, train_member, train_upm
from .preprocess import apply_transform, fit_preprocessing
from .seeds import derive

CSV_COLUMNS = ("state", "accuracy_pct", "f1_weighted_pct", "kappa")


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # counts[actual, predicted]

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (2, 2) or (c < 0).any():
            raise ValueError("a confusion matrix is a 2x2 array of non-negative counts")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_pairs(cls, actual, predicted) -> "ConfusionMatrix":
        c = np.zeros((2, 2), dtype=np.int64)
        np.add.at(c, (np.asarray(actual, dtype=np.int64), np.asarray(predicted, dtype=np.int64)), 1)
        return cls(c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def to_dict(self) -> dict:
        return {"labels": list(CLASSES), "counts": self.counts.tolist()}


def _as_counts(cm) -> np.ndarray:
    c = cm.counts if isinstance(cm, ConfusionMatrix) else np.asarray(cm)
    c = c.astype(float)
    if c.sum() <= 0:
        raise ValueError("confusion matrix is empty")
    return c


def accuracy(cm) -> float:
    c = _as_counts(cm)
    return 100.0 * np.trace(c) / c.sum()


def weighted_f1(cm) -> float:
    c = _as_counts(cm)
    n = c.sum()
    total = 0.0
    for k in range(c.shape[0]):
        tp = c[k, k]
        col, row = c[:, k].sum(), c[k, :].sum()
        p = tp / col if col else 0.0
        r = tp / row if row else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        total += row / n * f1
    return 100.0 * total


def kappa(cm) -> float:
    c = _as_counts(cm)
    n = c.sum()
    po = np.trace(c) / n
    pe = float((c.sum(axis=1) * c.sum(axis=0)).sum()) / (n * n)
    if pe == 1.0:
        return 1.0 if po == 1.0 else 0.0
    return float((po - pe) / (1.0 - pe))


def metrics(cm) -> dict:
    return {"accuracy_pct": accuracy(cm), "f1_weighted_pct": weighted_f1(cm), "kappa": kappa(cm)}


@dataclass
class FoldResult:
    fold: int
    train_size: int
    test_size: int
    confusion: ConfusionMatrix
    test_indices: np.ndarray
    predictions: np.ndarray

    def to_dict(self) -> dict:
        return {"fold": self.fold, "train_size": self.train_size, "test_size": self.test_size,
                "confusion": self.confusion.counts.tolist(), **metrics(self.confusion)}


@dataclass
class EvalReport:
    dataset: str
    confusion: ConfusionMatrix
    folds: list
    config: dict
    seed: int
    learner: str = "upm"
    fold_sizes: list = field(default_factory=list)

    @property
    def accuracy_pct(self) -> float:
        return accuracy(self.confusion)

    @property
    def f1_weighted_pct(self) -> float:
        return weighted_f1(self.confusion)

    @property
    def kappa(self) -> float:
        return kappa(self.confusion)

    def predictions(self) -> np.ndarray:
        """Out-of-fold prediction for every instance, in dataset order."""
        n = sum(f.test_size for f in self.folds)
        out = np.full(n, -1, dtype=np.int64)
        for f in self.folds:
            out[f.test_indices] = f.predictions
        return out

    def row(self) -> dict:
        return {"state": self.dataset, "accuracy_pct": self.accuracy_pct,
                "f1_weighted_pct": self.f1_weighted_pct, "kappa": self.kappa}

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "learner": self.learner,
            "seed": int(self.seed),
            **metrics(self.confusion),
            "confusion": self.confusion.to_dict(),
            "folds": [f.to_dict() for f in self.folds],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerow(format_row(self.row()))
        return buf.getvalue()


def format_row(row: dict) -> list[str]:
    return [row["state"], f"{row['accuracy_pct']:.3f}", f"{row['f1_weighted_pct']:.3f}", f"{row['kappa']:.4f}"]


def _check_training_split(labels: np.ndarray, fold: int, name: str) -> None:
    counts = np.bincount(labels, minlength=2)
    if counts.min() == 0:
        raise DataError(f"{name}: training split of fold {fold} holds a single class; "
                        "use a larger dataset or fewer folds")


def _fold_seed(seed: int, fold: int) -> int:
    return derive(seed, "fold", fold) & 0x7FFFFFFFFFFFFFFF


def _evaluate_fold(ds_raw, plan, fold, cfg, seed, prefit, learner):
    train_idx, test_idx = plan.train_indices(fold), plan.test_indices(fold)
    _check_training_split(ds_raw.labels[train_idx], fold, ds_raw.name)
    fold_cfg = cfg.with_seed(_fold_seed(seed, fold))
    train_raw, test_raw = ds_raw.subset(train_idx), ds_raw.subset(test_idx)
    if learner == "upm":
        fit = None if prefit is None else (prefit[0].subset(train_idx), prefit[1])
        model = train_upm(train_raw, fold_cfg, prefit=fit)
        if prefit is None:
            pred, _ = model.predict_batch(test_raw)
        else:
            probs = {k: m.predict_proba(prefit[0].values[test_idx]) for k, m in model.members.items()}
            pred, _ = combine_batch(probs, cfg.rule, model.majority_class)
    else:
        if prefit is None:
            reduced, transform, _ = fit_preprocessing(train_raw, cfg.prep, derive(fold_cfg.seed, "prep") & 0x7FFFFFFF)
            X_test = apply_transform(transform, test_raw).values
        else:
            reduced, X_test = prefit[0].subset(train_idx), prefit[0].values[test_idx]
        member = train_member(reduced, fold_cfg, learner)
        pred = np.argmax(member.predict_proba(X_test), axis=1)
    cm = ConfusionMatrix.from_pairs(ds_raw.labels[test_idx], pred)
    return FoldResult(fold, len(train_idx), len(test_idx), cm, test_idx, np.asarray(pred, dtype=np.int64))


def cross_validate(ds_raw: Dataset, cfg: PipelineConfig = PipelineConfig(), seed: int | None = None,
                   learner: str = "upm", plan: FoldPlan | None = None, workers: int = 1) -> EvalReport:
    """Stratified k-fold CV of the pipeline (or of a single member via ``learner``).

    Preprocessing is fitted inside every fold on its training split unless
    ``cfg.global_prep`` is set, in which case it is fitted once on the whole
    dataset.  ``workers > 1`` evaluates folds in a process pool; every fold
    is seeded independently, so the report is identical either way.
    """
    seed = cfg.seed if seed is None else int(seed)
    if learner != "upm" and learner not in MEMBERS:
        raise ValueError(f"learner must be 'upm' or one of {MEMBERS}, got {learner!r}")
    if ds_raw.n < cfg.folds:
        raise DataError(f"{ds_raw.name}: {ds_raw.n} instances cannot fill {cfg.folds} folds")
    if plan is None:
        plan = stratified_kfold(ds_raw, cfg.folds, seed)
    prefit = None
    if cfg.global_prep:
        reduced, transform, _ = fit_preprocessing(ds_raw, cfg.prep, derive(seed, "global-prep") & 0x7FFFFFFF)
        prefit = (reduced, transform)
    args = [(ds_raw, plan, f, cfg, seed, prefit, learner) for f in range(plan.k)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            folds = list(pool.map(_evaluate_fold_star, args))
    else:
        folds = [_evaluate_fold(*a) for a in args]
    pooled = ConfusionMatrix(sum(f.confusion.counts for f in folds))
    return EvalReport(ds_raw.name, pooled, folds, cfg.to_dict(), seed, learner, plan.sizes().tolist())


def _evaluate_fold_star(args):
    return _evaluate_fold(*args)
