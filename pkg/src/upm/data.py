"""Tabular cohort representation, CSV ingestion and stratified fold planning."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

CLASSES = ("Placed", "Unplaced")
PLACED, UNPLACED = 0, 1
DEFAULT_LABEL_COLUMN = "placement_status"
MISSING_TOKENS = ("", "?")

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class AttributeDescriptor:
    name: str
    kind: str
    index: int
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown attribute kind {self.kind!r}")
        if self.kind == CATEGORICAL and not self.categories:
            raise ValueError(f"categorical attribute {self.name!r} has no categories")
        if self.kind == NUMERIC and self.categories:
            raise ValueError(f"numeric attribute {self.name!r} cannot list categories")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def reindexed(self, index: int) -> "AttributeDescriptor":
        return AttributeDescriptor(self.name, self.kind, index, self.categories)

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "index": self.index}
        if self.categories:
            d["categories"] = list(self.categories)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributeDescriptor":
        return cls(d["name"], d["kind"], int(d["index"]), tuple(d.get("categories", ())))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable cohort: ``values[i, j]`` holds a number or a category id.

    Missing cells are tracked by the boolean ``missing`` mask; the value stored
    underneath a missing cell is always 0 and carries no meaning.  Labels are
    class indices into :data:`CLASSES`.
    """

    attributes: tuple[AttributeDescriptor, ...]
    values: np.ndarray
    missing: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    source: str = ""

    def __post_init__(self):
        attrs = tuple(self.attributes)
        values = np.asarray(self.values, dtype=float)
        n = values.shape[0] if values.ndim == 2 else len(self.labels)
        if values.ndim != 2:
            values = values.reshape(n, len(attrs))
        missing = np.asarray(self.missing, dtype=bool).reshape(values.shape)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.shape[0] < 1:
            raise DataError("a dataset needs at least one instance")
        if values.shape[1] != len(attrs):
            raise DataError(f"rows have {values.shape[1]} cells but {len(attrs)} attributes are declared")
        if labels.shape != (values.shape[0],):
            raise DataError("labels length must equal the number of rows")
        if np.any((labels != PLACED) & (labels != UNPLACED)):
            raise DataError("labels must be class indices 0 (Placed) or 1 (Unplaced)")
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise DataError("attribute names must be unique")
        if [a.index for a in attrs] != list(range(len(attrs))):
            raise DataError("attribute indices must be 0..A-1 in order")
        values = np.where(missing, 0.0, values)
        for a in attrs:
            col = values[~missing[:, a.index], a.index]
            if a.is_numeric:
                if not np.all(np.isfinite(col)):
                    raise DataError(f"attribute {a.name!r} has non-finite values")
            elif col.size and (np.any(col < 0) or np.any(col >= len(a.categories)) or np.any(col != np.floor(col))):
                raise DataError(f"attribute {a.name!r} has category ids outside its category list")
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "missing", _frozen(missing))
        object.__setattr__(self, "labels", _frozen(labels))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def attribute_names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def has_missing(self) -> bool:
        return bool(self.missing.any())

    def subset(self, rows: Sequence[int] | np.ndarray, name: str | None = None) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.attributes, self.values[rows], self.missing[rows], self.labels[rows],
                       name=self.name if name is None else name, source=self.source)

    def select_attributes(self, indices: Sequence[int]) -> "Dataset":
        indices = list(indices)
        attrs = tuple(self.attributes[j].reindexed(i) for i, j in enumerate(indices))
        return Dataset(attrs, self.values[:, indices], self.missing[:, indices], self.labels,
                       name=self.name, source=self.source)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.attributes, self.values, self.missing, labels, self.name, self.source)

    def cell_text(self, i: int, j: int) -> str:
        if self.missing[i, j]:
            return "?"
        a = self.attributes[j]
        v = self.values[i, j]
        if a.is_numeric:
            return repr(float(v))
        return a.categories[int(v)]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.attributes == other.attributes
                and self.name == other.name
                and np.array_equal(self.missing, other.missing)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None

    def __repr__(self):
        return f"Dataset(name={self.name!r}, n={self.n}, attributes={self.n_attributes})"


def parse_label(token: str) -> int:
    t = token.strip().lower()
    for k, c in enumerate(CLASSES):
        if t == c.lower():
            return k
    raise DataError(f"unknown label value {token.strip()!r} (expected Placed or Unplaced)")


def _is_number(token: str) -> bool:
    try:
        return math.isfinite(float(token))
    except ValueError:
        return False


def load_csv(path: str | os.PathLike, label_column: str = DEFAULT_LABEL_COLUMN,
             types: Mapping[str, str] | None = None, name: str | None = None) -> Dataset:
    """Read a cohort CSV.

    A column is numeric when every non-missing cell parses as a finite number
    and categorical otherwise, unless ``types`` names its kind.  ``?`` and
    empty cells are missing.  Categories are listed in sorted order.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} cells, got {len(row)}")
            rows.append([c.strip() for c in row])
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not found")
    if not rows:
        raise DataError(f"{path}: no data rows")
    types = dict(types or {})
    unknown = set(types) - set(header)
    if unknown:
        raise DataError(f"type hints for unknown columns: {sorted(unknown)}")

    li = header.index(label_column)
    labels = np.array([parse_label(r[li]) for r in rows])
    cols = [j for j in range(len(header)) if j != li]
    n = len(rows)
    values = np.zeros((n, len(cols)))
    missing = np.zeros((n, len(cols)), dtype=bool)
    attrs = []
    for out_j, j in enumerate(cols):
        cells = [r[j] for r in rows]
        miss = np.array([c in MISSING_TOKENS for c in cells])
        present = [c for c, m in zip(cells, miss) if not m]
        kind = types.get(header[j])
        if kind is None:
            kind = NUMERIC if all(_is_number(c) for c in present) else CATEGORICAL
        if kind == NUMERIC:
            bad = [c for c in present if not _is_number(c)]
            if bad:
                raise DataError(f"column {header[j]!r}: non-numeric value {bad[0]!r}")
            col = np.array([0.0 if m else float(c) for c, m in zip(cells, miss)])
            attrs.append(AttributeDescriptor(header[j], NUMERIC, out_j))
        else:
            cats = tuple(sorted(set(present))) or ("?",)
            lookup = {c: k for k, c in enumerate(cats)}
            col = np.array([0.0 if m else float(lookup[c]) for c, m in zip(cells, miss)])
            attrs.append(AttributeDescriptor(header[j], CATEGORICAL, out_j, cats))
        values[:, out_j] = col
        missing[:, out_j] = miss
    return Dataset(tuple(attrs), values, missing, labels,
                   name=name or os.path.splitext(os.path.basename(path))[0], source=path)


def write_csv(ds: Dataset, path: str | os.PathLike, label_column: str = DEFAULT_LABEL_COLUMN) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.attribute_names + [label_column])
        for i in range(ds.n):
            w.writerow([ds.cell_text(i, j) for j in range(ds.n_attributes)] + [CLASSES[ds.labels[i]]])


def class_distribution(ds: Dataset) -> dict[str, int]:
    counts = np.bincount(ds.labels, minlength=len(CLASSES))
    return {c: int(counts[k]) for k, c in enumerate(CLASSES)}


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", _frozen(np.asarray(self.assignments, dtype=np.int64)))

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def folds(self) -> Iterable[tuple[np.ndarray, np.ndarray]]:
        for f in range(self.k):
            yield self.train_indices(f), self.test_indices(f)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def stratified_kfold(ds: Dataset | np.ndarray, k: int = 10, seed: int = 1) -> FoldPlan:
    """Plan ``k`` stratified folds.

    Instances of each class are shuffled with the seeded generator and then
    dealt round-robin, class after class, so the deal never restarts.  Fold
    sizes and per-class fold counts therefore differ by at most one, with the
    remainders landing in the lowest-numbered folds.
    """
    labels = ds.labels if isinstance(ds, Dataset) else np.asarray(ds)
    n = len(labels)
    if k < 2 or k > n:
        raise DataError(f"fold count must satisfy 2 <= k <= N (k={k}, N={n})")
    rng = np.random.default_rng(seed)
    order = []
    for c in range(len(CLASSES)):
        idx = np.flatnonzero(labels == c)
        order.append(idx[rng.permutation(len(idx))])
    order = np.concatenate(order)
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % k
    return FoldPlan(k, assignments, seed)
