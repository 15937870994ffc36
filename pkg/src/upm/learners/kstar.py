"""K* instance-based classification.

A query reaches each training instance through per-attribute transformation
probabilities.  Numeric attributes use an exponential kernel
``P_i ~ exp(-|x - v_i| / x0)`` over the training column; categorical
attributes keep the query's category with stop probability ``s`` and spread
``1 - s`` evenly over the other categories.  The scale (``x0`` or ``s``) is
solved per query and attribute by bisection so that the effective number of
instances ``(sum P)^2 / sum P^2`` equals ``1 + blend/100 * (N - 1)``: a blend
near 0 recovers the nearest neighbour, a blend of 100 weighs every instance
equally.  Instance probabilities multiply across attributes and are summed
per class.

The kernel normalizer is shared by every training instance for a given query
and attribute, so it cancels in the final class distribution and is never
formed; all work is done in log space to avoid underflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import AttributeDescriptor, Dataset
from .config import KStarConfig, TrainConfig
from .tree import LearnerError, check_trainable

N0_TOL = 1e-6
S_MAX = 1.0 - 1e-9


def effective_count(logw: np.ndarray) -> np.ndarray:
    """``(sum w)^2 / sum w^2`` along the last axis, from log weights."""
    m = logw.max(axis=-1, keepdims=True)
    w = np.exp(logw - m)
    return w.sum(axis=-1) ** 2 / (w * w).sum(axis=-1)


def _numeric_logp(q: np.ndarray, col: np.ndarray, target: float, n_iter: int):
    dist = np.abs(q[:, None] - col[None, :])
    dist -= dist.min(axis=1, keepdims=True)
    span = dist.max(axis=1)
    n = col.size
    logp = np.zeros_like(dist)
    achieved = np.full(q.size, float(n))
    rows = np.flatnonzero(span > 0)
    if target >= n - 1e-12 or rows.size == 0:
        return logp, achieved
    d = dist[rows]
    s = span[rows]
    lo = np.log(s * 1e-9)
    hi = np.log(s * 1e9)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        e = np.exp(-d / np.exp(mid)[:, None])
        n0 = e.sum(axis=1) ** 2 / (e * e).sum(axis=1)
        too_small = n0 < target
        lo = np.where(too_small, mid, lo)
        hi = np.where(too_small, hi, mid)
    x0 = np.exp(0.5 * (lo + hi))
    logp[rows] = -d / x0[:, None]
    achieved[rows] = effective_count(logp[rows])
    return logp, achieved


def _categorical_logp(q: np.ndarray, col: np.ndarray, n_cats: int, target: float, n_iter: int):
    match = q[:, None] == col[None, :]
    m = match.sum(axis=1).astype(float)
    n = col.size
    logp = np.zeros(match.shape)
    achieved = np.full(q.size, float(n))
    if n_cats < 2 or target >= n - 1e-12:
        return logp, achieved
    rows = np.flatnonzero((m > 0) & (m < n))
    if rows.size == 0:
        return logp, achieved
    mr = m[rows]
    r = n - mr

    def n0(s):
        other = (1.0 - s) / (n_cats - 1)
        return (mr * s + r * other) ** 2 / (mr * s * s + r * other * other)

    lo = np.full(rows.size, 1.0 / n_cats)
    hi = np.ones(rows.size)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        above = n0(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    s = 0.5 * (lo + hi)
    # when the matches alone exceed the target the best attainable s is 1; it
    # stays a hair below so other instances keep a finite (tiny) weight
    s = np.minimum(np.where(mr >= target, 1.0, s), S_MAX)
    other = (1.0 - s) / (n_cats - 1)
    logp[rows] = np.where(match[rows], np.log(s)[:, None], np.log(other)[:, None])
    achieved[rows] = n0(s)
    return logp, achieved


@dataclass(eq=False)
class KStarModel:
    attributes: tuple[AttributeDescriptor, ...]
    values: np.ndarray
    labels: np.ndarray
    blend: float = 20.0
    max_iter: int = 64
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.blend <= 100.0:
            raise LearnerError(f"blend must lie in (0, 100], got {self.blend}")
        if len(self.labels) == 0:
            raise LearnerError("K* needs a non-empty training set")

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def target_count(self) -> float:
        n = len(self.labels)
        return 1.0 + self.blend / 100.0 * (n - 1)

    def predict_proba(self, X: np.ndarray, diagnostics: bool = False, chunk: int = 256):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_attributes:
            raise LearnerError(f"expected rows with {self.n_attributes} attributes")
        target = self.target_count
        out = np.empty((X.shape[0], 2))
        flagged = 0
        worst = 0.0
        for start in range(0, X.shape[0], chunk):
            q = X[start:start + chunk]
            total = np.zeros((q.shape[0], len(self.labels)))
            for a in self.attributes:
                col = self.values[:, a.index]
                if a.is_numeric:
                    lp, n0 = _numeric_logp(q[:, a.index], col, target, self.max_iter)
                else:
                    lp, n0 = _categorical_logp(q[:, a.index], col, len(a.categories), target, self.max_iter)
                total += lp
                gap = np.abs(n0 - target)
                # a column whose values all match or all differ cannot be tuned; it is uninformative
                informative = n0 < len(self.labels) - 1e-9
                flagged += int(np.sum((gap > N0_TOL) & informative))
                if informative.any():
                    worst = max(worst, float(gap[informative].max()))
            m = total.max(axis=1, keepdims=True)
            w = np.exp(total - m)
            scores = np.stack([w[:, self.labels == c].sum(axis=1) for c in (0, 1)], axis=1)
            out[start:start + chunk] = scores / scores.sum(axis=1, keepdims=True)
        if diagnostics:
            return out, {"flagged": flagged, "max_gap": worst, "target": target}
        return out

    def to_dict(self) -> dict:
        return {"blend": self.blend, "max_iter": self.max_iter, "meta": self.meta,
                "attributes": [a.to_dict() for a in self.attributes],
                "values": self.values.tolist(), "labels": self.labels.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KStarModel":
        attrs = tuple(AttributeDescriptor.from_dict(a) for a in d["attributes"])
        values = np.array(d["values"], dtype=float).reshape(len(d["labels"]), len(attrs))
        return cls(attrs, values, np.array(d["labels"], dtype=np.int64), float(d["blend"]),
                   int(d.get("max_iter", 64)), dict(d.get("meta", {})))


def train_kstar(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> KStarModel:
    check_trainable(ds)
    kc: KStarConfig = cfg.kstar
    return KStarModel(ds.attributes, np.array(ds.values), np.array(ds.labels), kc.blend, kc.max_iter)


def kstar_predict(m: KStarModel, x) -> np.ndarray:
    """Class distribution for a single instance."""
    return m.predict_proba(np.asarray(x, dtype=float).reshape(1, -1))[0]
