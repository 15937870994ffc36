"""Automated preprocessing: cleaning, attribute clustering and selection.

The fitted state of every step lives in a :class:`Transform`, which is the only
thing needed to push new rows (a CV test fold, a fresh cohort) through the same
cleaning, imputation, scaling and selection.  Nothing here refits on the data
it is applied to.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .data import CATEGORICAL, AttributeDescriptor, DataError, Dataset

TRANSFORM_VERSION = "upm-transform-v1"
MEDIAN_MODE = "median_mode"
DROP_ROW = "drop_row"


class PreprocessError(DataError):
    pass


@dataclass(frozen=True)
class CleanConfig:
    max_missing_fraction: float = 0.5
    impute: str = MEDIAN_MODE
    drop_constant: bool = True

    def __post_init__(self):
        if not 0.0 <= self.max_missing_fraction <= 1.0:
            raise ValueError("max_missing_fraction must lie in [0, 1]")
        if self.impute not in (MEDIAN_MODE, DROP_ROW):
            raise ValueError(f"impute must be {MEDIAN_MODE!r} or {DROP_ROW!r}")


@dataclass(frozen=True)
class Transform:
    """Fitted preprocessing state, expressed against the raw schema.

    ``kept`` lists raw attribute indices in output order; ``impute`` and
    ``scale`` are aligned with it (``scale`` entries are ``None`` for
    categorical attributes).
    """

    raw_schema: tuple[AttributeDescriptor, ...]
    kept: tuple[int, ...]
    impute: tuple[float, ...]
    scale: tuple[tuple[float, float] | None, ...]

    @property
    def output_schema(self) -> tuple[AttributeDescriptor, ...]:
        return tuple(self.raw_schema[j].reindexed(i) for i, j in enumerate(self.kept))

    def fingerprint(self) -> str:
        return hashlib.sha1(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:12]

    def restrict(self, positions) -> "Transform":
        """Keep only the output attributes at ``positions`` (in that order)."""
        positions = list(positions)
        return Transform(self.raw_schema,
                         tuple(self.kept[p] for p in positions),
                         tuple(self.impute[p] for p in positions),
                         tuple(self.scale[p] for p in positions))

    def to_dict(self) -> dict:
        return {
            "version": TRANSFORM_VERSION,
            "kept": list(self.kept),
            "impute": list(self.impute),
            "scale": [None if s is None else list(s) for s in self.scale],
            "raw_schema": [a.to_dict() for a in self.raw_schema],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transform":
        if d.get("version") != TRANSFORM_VERSION:
            raise PreprocessError(f"unsupported transform version {d.get('version')!r}")
        return cls(tuple(AttributeDescriptor.from_dict(a) for a in d["raw_schema"]),
                   tuple(int(k) for k in d["kept"]),
                   tuple(float(v) for v in d["impute"]),
                   tuple(None if s is None else (float(s[0]), float(s[1])) for s in d["scale"]))


def _tag(t: Transform) -> str:
    return f"+upm-transform:{t.fingerprint()}"


def _impute_value(col: np.ndarray, present: np.ndarray, attr: AttributeDescriptor) -> float:
    vals = col[present]
    if vals.size == 0:
        return 0.0
    if attr.is_numeric:
        return float(np.median(vals))
    counts = np.bincount(vals.astype(np.int64), minlength=len(attr.categories))
    return float(np.argmax(counts))


def _scaled(col: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi > lo:
        return np.clip((col - lo) / (hi - lo), 0.0, 1.0)
    return np.zeros_like(col)


def clean(ds: Dataset, cfg: CleanConfig = CleanConfig()) -> tuple[Dataset, Transform]:
    """Drop sparse and constant attributes, impute, and min-max scale numerics."""
    miss_frac = ds.missing.mean(axis=0)
    keep = []
    for a in ds.attributes:
        j = a.index
        if miss_frac[j] > cfg.max_missing_fraction:
            continue
        present = ~ds.missing[:, j]
        if cfg.drop_constant and np.unique(ds.values[present, j]).size <= 1:
            continue
        keep.append(j)
    if not keep:
        raise PreprocessError(f"{ds.name}: cleaning dropped every attribute")

    rows = np.arange(ds.n)
    if cfg.impute == DROP_ROW:
        rows = np.flatnonzero(~ds.missing[:, keep].any(axis=1))
        if rows.size == 0:
            raise PreprocessError(f"{ds.name}: dropping rows with missing cells left no instances")

    impute, scale = [], []
    for j in keep:
        a = ds.attributes[j]
        col = ds.values[rows, j]
        present = ~ds.missing[rows, j]
        fill = _impute_value(col, present, a)
        impute.append(fill)
        if a.is_numeric:
            filled = np.where(present, col, fill)
            scale.append((float(filled.min()), float(filled.max())))
        else:
            scale.append(None)
    t = Transform(tuple(ds.attributes), tuple(keep), tuple(impute), tuple(scale))
    return _apply(t, ds.subset(rows)), t


def _apply(t: Transform, ds: Dataset) -> Dataset:
    values = np.empty((ds.n, len(t.kept)))
    for out_j, (j, fill, sc) in enumerate(zip(t.kept, t.impute, t.scale)):
        col = np.where(ds.missing[:, j], fill, ds.values[:, j])
        values[:, out_j] = col if sc is None else _scaled(col, *sc)
    return Dataset(t.output_schema, values, np.zeros(values.shape, dtype=bool), ds.labels,
                   name=ds.name, source=ds.source + _tag(t))


def _conform(t: Transform, ds: Dataset) -> Dataset:
    """Map ``ds`` onto the raw schema ``t`` was fitted on.

    Categories are matched by label; a category unseen at fit time becomes a
    missing cell and is imputed downstream.
    """
    if ds.attributes == t.raw_schema:
        return ds
    names = [a.name for a in t.raw_schema]
    if ds.attribute_names != names or any(a.kind != b.kind for a, b in zip(ds.attributes, t.raw_schema)):
        raise PreprocessError(f"{ds.name}: schema does not match the fitted transform")
    values = np.array(ds.values)
    missing = np.array(ds.missing)
    for a, fitted in zip(ds.attributes, t.raw_schema):
        if a.kind != CATEGORICAL or a.categories == fitted.categories:
            continue
        lookup = {c: k for k, c in enumerate(fitted.categories)}
        remap = np.array([lookup.get(c, -1) for c in a.categories], dtype=float)
        j = a.index
        col = remap[np.where(missing[:, j], 0, values[:, j]).astype(np.int64)]
        missing[:, j] |= col < 0
        values[:, j] = np.where(col < 0, 0.0, col)
    return Dataset(t.raw_schema, values, missing, ds.labels, ds.name, ds.source)


def apply_transform(t: Transform, ds: Dataset) -> Dataset:
    """Apply fitted preprocessing to raw-schema data using stored parameters only."""
    if ds.attributes == t.output_schema and ds.source.endswith(_tag(t)):
        return ds
    return _apply(t, _conform(t, ds))


# -- attribute clustering ---------------------------------------------------

@dataclass(frozen=True)
class AttributeClusterSet:
    clusters: tuple[tuple[int, ...], ...]
    representatives: tuple[int, ...]
    relevance: np.ndarray
    k_used: int
    attribute_names: tuple[str, ...]
    silhouette: float = float("nan")
    silhouette_by_k: dict = field(default_factory=dict)

    def selected(self) -> list[int]:
        return sorted(self.representatives)

    def selected_names(self) -> list[str]:
        return [self.attribute_names[j] for j in self.selected()]


def _standardize(x: np.ndarray) -> np.ndarray:
    x = x - x.mean(axis=0)
    sd = np.sqrt((x ** 2).sum(axis=0))
    return np.divide(x, sd, out=np.zeros_like(x), where=sd > 0)


def _cramers_v(a: np.ndarray, b: np.ndarray) -> float:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    r, c = ai.max() + 1, bi.max() + 1
    if min(r, c) < 2:
        return 0.0
    table = np.zeros((r, c))
    np.add.at(table, (ai, bi), 1.0)
    n = table.sum()
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / n
    chi2 = ((table - expected) ** 2 / expected).sum()
    return float(np.sqrt(min(1.0, chi2 / (n * (min(r, c) - 1)))))


def _correlation_ratio(categories: np.ndarray, x: np.ndarray) -> float:
    """Association of a categorical with a numeric column via its one-hot fit.

    Equals the multiple correlation of ``x`` regressed on the category
    indicators, so it coincides with |Pearson r| for two categories.
    """
    _, ci = np.unique(categories, return_inverse=True)
    total = ((x - x.mean()) ** 2).sum()
    if total <= 0:
        return 0.0
    sums = np.bincount(ci, weights=x)
    counts = np.bincount(ci)
    between = (sums ** 2 / counts).sum() - x.sum() ** 2 / x.size
    return float(np.sqrt(np.clip(between / total, 0.0, 1.0)))


def association_matrix(ds: Dataset) -> np.ndarray:
    """Pairwise attribute association in [0, 1]: |r|, Cramér's V or the correlation ratio."""
    num = [a.index for a in ds.attributes if a.is_numeric]
    cat = [a.index for a in ds.attributes if not a.is_numeric]
    A = ds.n_attributes
    assoc = np.zeros((A, A))
    if num:
        z = _standardize(ds.values[:, num])
        assoc[np.ix_(num, num)] = np.abs(z.T @ z)
    for p, i in enumerate(cat):
        for j in cat[p + 1:]:
            assoc[i, j] = assoc[j, i] = _cramers_v(ds.values[:, i], ds.values[:, j])
        for j in num:
            assoc[i, j] = assoc[j, i] = _correlation_ratio(ds.values[:, i], ds.values[:, j])
    np.fill_diagonal(assoc, 1.0)
    return np.clip(assoc, 0.0, 1.0)


def label_relevance(ds: Dataset) -> np.ndarray:
    """|point-biserial r| for numeric attributes, Cramér's V for categorical ones."""
    y = ds.labels.astype(float)
    rel = np.zeros(ds.n_attributes)
    num = [a.index for a in ds.attributes if a.is_numeric]
    if num and np.ptp(y) > 0:
        z = _standardize(ds.values[:, num])
        yz = _standardize(y[:, None])[:, 0]
        rel[num] = np.abs(z.T @ yz)
    for a in ds.attributes:
        if not a.is_numeric:
            rel[a.index] = _cramers_v(ds.values[:, a.index], ds.labels)
    return np.clip(rel, 0.0, 1.0)


def _kmedoids_once(dist: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100):
    A = dist.shape[0]
    medoids = [int(rng.integers(A))]
    for _ in range(1, k):
        d = dist[:, medoids].min(axis=1)
        w = d ** 2
        if w.sum() <= 0:
            rest = np.setdiff1d(np.arange(A), medoids)
            medoids.append(int(rest[rng.integers(rest.size)]))
        else:
            medoids.append(int(rng.choice(A, p=w / w.sum())))
    medoids = np.array(medoids)
    for _ in range(max_iter):
        assign = np.argmin(dist[:, medoids], axis=1)
        assign[medoids] = np.arange(k)
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(assign == c)
            within = dist[np.ix_(members, members)].sum(axis=1)
            new[c] = members[np.argmin(within)]
        if np.array_equal(new, medoids):
            break
        medoids = new
    medoids = _swap_refine(dist, medoids, max_iter)
    assign = np.argmin(dist[:, medoids], axis=1)
    assign[medoids] = np.arange(k)
    cost = dist[np.arange(A), medoids[assign]].sum()
    return assign, cost


def _swap_refine(dist: np.ndarray, medoids: np.ndarray, max_iter: int) -> np.ndarray:
    """Greedy medoid/non-medoid swaps while the total distance drops.

    The alternating update only moves a medoid within its own cluster, so it
    can leave two natural groups merged under one medoid; a swap can move a
    medoid anywhere.  Each pass applies the single best swap (lowest medoid
    slot, then lowest attribute index on ties).
    """
    A, k = dist.shape[0], medoids.size
    medoids = medoids.copy()
    for _ in range(max_iter):
        dm = dist[:, medoids]
        order = np.argsort(dm, axis=1, kind="stable")
        nearest_slot = order[:, 0]
        d1 = dm[np.arange(A), nearest_slot]
        d2 = dm[np.arange(A), order[:, 1]]
        current = d1.sum()
        best_gain, best = 1e-12, None
        for i in range(k):
            fallback = np.where(nearest_slot == i, d2, d1)
            costs = np.minimum(dist, fallback[:, None]).sum(axis=0)
            costs[medoids] = np.inf
            h = int(np.argmin(costs))
            gain = current - costs[h]
            if gain > best_gain + 1e-12:
                best_gain, best = gain, (i, h)
        if best is None:
            break
        medoids[best[0]] = best[1]
    return medoids


def kmedoids(dist: np.ndarray, k: int, seed: int, n_init: int = 4) -> np.ndarray:
    """Seeded k-medoids (k-medoids++ start, alternating updates, swap refinement); returns labels."""
    A = dist.shape[0]
    if k >= A:
        return np.arange(A)
    if k == 1:
        return np.zeros(A, dtype=np.int64)
    rng = np.random.default_rng(seed)
    best, best_cost = None, np.inf
    for _ in range(n_init):
        assign, cost = _kmedoids_once(dist, k, rng)
        if cost < best_cost - 1e-12:
            best, best_cost = assign, cost
    return best


def silhouette(dist: np.ndarray, labels: np.ndarray) -> float:
    ks = np.unique(labels)
    if ks.size < 2:
        return 0.0
    onehot = (labels[:, None] == ks[None, :]).astype(float)
    sizes = onehot.sum(axis=0)
    sums = dist @ onehot
    own = np.searchsorted(ks, labels)
    A = dist.shape[0]
    own_size = sizes[own]
    a = np.divide(sums[np.arange(A), own], own_size - 1, out=np.zeros(A), where=own_size > 1)
    means = sums / sizes
    means[np.arange(A), own] = np.inf
    b = means.min(axis=1)
    s = np.where(own_size > 1, (b - a) / np.maximum(np.maximum(a, b), 1e-300), 0.0)
    return float(s.mean())


def cluster_attributes(ds: Dataset, k: int | None = None, seed: int = 0,
                       max_k: int = 15) -> AttributeClusterSet:
    """Group associated attributes and pick the most label-relevant one per group.

    Distance between attributes is ``1 - association``.  Without an explicit
    ``k`` the cluster count maximizing mean silhouette over
    ``2..min(max_k, A-1)`` is used (smallest k on ties).
    """
    if ds.has_missing():
        raise PreprocessError("cluster_attributes needs a cleaned dataset without missing cells")
    A = ds.n_attributes
    if A < 2:
        raise PreprocessError("cluster_attributes needs at least two attributes")
    if k is not None and not 1 <= k <= A:
        raise PreprocessError(f"cluster count must lie in [1, {A}], got {k}")
    dist = 1.0 - association_matrix(ds)
    np.fill_diagonal(dist, 0.0)
    relevance = label_relevance(ds)

    scores = {}
    if k is None:
        best_k, best_labels, best_s = 1, np.zeros(A, dtype=np.int64), -np.inf
        for kk in range(2, min(max_k, A - 1) + 1):
            labels = kmedoids(dist, kk, seed)
            s = silhouette(dist, labels)
            scores[kk] = s
            if s > best_s + 1e-12:
                best_k, best_labels, best_s = kk, labels, s
        k, labels = best_k, best_labels
        sil = best_s if scores else 0.0
    else:
        labels = kmedoids(dist, k, seed)
        sil = silhouette(dist, labels)

    groups = [tuple(int(j) for j in np.flatnonzero(labels == c)) for c in np.unique(labels)]
    groups.sort(key=lambda g: g[0])
    reps = []
    for g in groups:
        r = max(g, key=lambda j: (relevance[j], -j))
        reps.append(r)
    rel = np.array(relevance)
    rel.setflags(write=False)
    return AttributeClusterSet(tuple(groups), tuple(reps), rel, len(groups),
                               tuple(ds.attribute_names), float(sil), scores)


def select_and_transform(ds: Dataset, acs: AttributeClusterSet,
                         base: Transform | None = None) -> tuple[Dataset, Transform]:
    """Keep the cluster representatives (in original order) and compose the transform.

    ``base`` is the transform that produced ``ds`` from raw data; without it
    the returned transform treats ``ds`` itself as the raw schema.
    """
    if tuple(ds.attribute_names) != acs.attribute_names:
        raise PreprocessError("attribute cluster set was built on a different schema")
    if base is None:
        base = Transform(tuple(ds.attributes), tuple(range(ds.n_attributes)),
                         (0.0,) * ds.n_attributes, (None,) * ds.n_attributes)
    elif tuple(a.name for a in base.output_schema) != acs.attribute_names:
        raise PreprocessError("base transform does not produce the clustered schema")
    chosen = acs.selected()
    t = base.restrict(chosen)
    out = ds.select_attributes(chosen)
    out = Dataset(out.attributes, out.values, out.missing, out.labels, out.name,
                  _strip_tag(ds.source) + _tag(t))
    return out, t


def _strip_tag(source: str) -> str:
    i = source.find("+upm-transform:")
    return source if i < 0 else source[:i]


@dataclass(frozen=True)
class PrepConfig:
    clean: CleanConfig = CleanConfig()
    k: int | None = None
    max_k: int = 15


def fit_preprocessing(ds: Dataset, cfg: PrepConfig = PrepConfig(), seed: int = 0):
    """Run clean -> cluster_attributes -> select_and_transform.

    Returns ``(reduced_dataset, transform, cluster_set)``.
    """
    cleaned, t_clean = clean(ds, cfg.clean)
    if cleaned.n_attributes < 2:
        acs = AttributeClusterSet(((0,),), (0,), label_relevance(cleaned), 1,
                                  tuple(cleaned.attribute_names))
    else:
        k = cfg.k if cfg.k is None else min(cfg.k, cleaned.n_attributes)
        acs = cluster_attributes(cleaned, k, seed, cfg.max_k)
    reduced, t = select_and_transform(cleaned, acs, t_clean)
    return reduced, t, acs
