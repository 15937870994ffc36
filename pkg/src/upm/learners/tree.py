"""Binary classification trees: representation, growth and routing.

Trees are stored as flat per-node arrays in preorder (node 0 is the root and a
left subtree is numbered before its right sibling).  Internal nodes test either
``x[attr] <= threshold`` or ``x[attr] in categories``; the left child receives
instances for which the test holds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset

LEAF = -1
_EPS_GAIN = 1e-12


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class SplitPredicate:
    attribute: int
    threshold: float | None = None
    categories: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.threshold is None) == (self.categories is None):
            raise ValueError("a split tests either a threshold or a category set")
        if self.threshold is not None and not np.isfinite(self.threshold):
            raise ValueError("split thresholds must be finite")
        if self.categories is not None and not self.categories:
            raise ValueError("category split needs at least one category")

    @property
    def is_numeric(self) -> bool:
        return self.threshold is not None

    def holds(self, column: np.ndarray) -> np.ndarray:
        if self.is_numeric:
            return column <= self.threshold
        return np.isin(column, self.categories)


@dataclass(eq=False)
class TreeModel:
    feature: np.ndarray          # attribute index per node, LEAF for leaves
    threshold: np.ndarray        # numeric threshold (NaN for categorical / leaves)
    categories: list             # tuple of category ids for categorical splits, else None
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray           # (n_nodes, 2) training class counts reaching each node
    n_attributes: int
    algorithm: str = "tree"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())

    @property
    def depth(self) -> int:
        return int(self.node_depths().max())

    def node_depths(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for t in range(self.n_nodes):
            if self.feature[t] != LEAF:
                d[self.left[t]] = d[self.right[t]] = d[t] + 1
        return d

    def predicate(self, node: int) -> SplitPredicate:
        f = int(self.feature[node])
        if f == LEAF:
            raise ValueError(f"node {node} is a leaf")
        if self.categories[node] is not None:
            return SplitPredicate(f, categories=tuple(self.categories[node]))
        return SplitPredicate(f, threshold=float(self.threshold[node]))

    def distribution(self, node: int) -> np.ndarray:
        c = self.counts[node]
        return c / c.sum()

    def leaf_distributions(self) -> np.ndarray:
        tot = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.where(tot > 0, tot, 1.0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row of ``X`` is routed to."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_attributes:
            raise LearnerError(f"expected rows with {self.n_attributes} attributes")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            f = self.feature[nd]
            go_left = X[r, f] <= self.threshold[nd]
            cat = np.isnan(self.threshold[nd])
            if cat.any():
                for t in np.unique(nd[cat]):
                    sel = nd == t
                    go_left[sel] = np.isin(X[r[sel], self.feature[t]], self.categories[t])
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_distributions()[self.apply(X)]

    def paths(self, X: np.ndarray) -> np.ndarray:
        """Nodes visited by each row, root first, padded with -1."""
        X = np.asarray(X, dtype=float)
        depth = self.depth
        out = np.full((X.shape[0], depth + 1), -1, dtype=np.int64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        out[:, 0] = 0
        for d in range(1, depth + 1):
            live = self.feature[node] != LEAF
            if not live.any():
                break
            r = np.flatnonzero(live)
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            cat = np.isnan(self.threshold[nd])
            for t in np.unique(nd[cat]):
                sel = nd == t
                go_left[sel] = np.isin(X[r[sel], self.feature[t]], self.categories[t])
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            out[r, d] = node[r]
        return out

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "n_attributes": self.n_attributes,
            "meta": self.meta,
            "nodes": [self._node_dict(t) for t in range(self.n_nodes)],
        }

    def _node_dict(self, t: int) -> dict:
        d = {"counts": [float(c) for c in self.counts[t]]}
        if self.feature[t] != LEAF:
            d["attribute"] = int(self.feature[t])
            if self.categories[t] is not None:
                d["categories"] = [int(c) for c in self.categories[t]]
            else:
                d["threshold"] = float(self.threshold[t])
            d["left"] = int(self.left[t])
            d["right"] = int(self.right[t])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        nodes = d["nodes"]
        n = len(nodes)
        feature = np.full(n, LEAF, dtype=np.int64)
        threshold = np.full(n, np.nan)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        cats = [None] * n
        counts = np.array([nd["counts"] for nd in nodes], dtype=float).reshape(n, 2)
        for t, nd in enumerate(nodes):
            if "attribute" in nd:
                feature[t] = nd["attribute"]
                left[t], right[t] = nd["left"], nd["right"]
                if "categories" in nd:
                    cats[t] = tuple(nd["categories"])
                else:
                    threshold[t] = nd["threshold"]
        return cls(feature, threshold, cats, left, right, counts, int(d["n_attributes"]),
                   d.get("algorithm", "tree"), d.get("seed"), dict(d.get("meta", {})))


def gini(class_counts) -> float:
    """Gini impurity ``1 - sum(p_i^2)`` of a vector of class counts."""
    c = np.asarray(class_counts, dtype=float)
    if np.any(c < 0):
        raise ValueError("class counts must be non-negative")
    total = c.sum()
    if total <= 0:
        raise ValueError("gini is undefined for all-zero counts")
    p = c / total
    return float(1.0 - (p ** 2).sum())


def check_trainable(ds: Dataset) -> None:
    if ds.n < 2:
        raise LearnerError(f"{ds.name}: need at least two instances to train")
    if ds.has_missing():
        raise LearnerError(f"{ds.name}: learners require complete data; run preprocessing first")


@dataclass
class _Split:
    attribute: int
    score: float
    threshold: float = np.nan
    category: int | None = None


def _best_numeric(Xn: np.ndarray, y: np.ndarray, attrs: np.ndarray, min_leaf: int):
    n = Xn.shape[0]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = y[order]
    l1 = np.cumsum(ys, axis=0)[:-1]
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    l0 = nl - l1
    r1 = ys.sum(axis=0) - l1
    r0 = nr - r1
    score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr
    valid = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    score = np.where(valid, score, -np.inf)
    pos = np.argmax(score, axis=0)
    best = score[pos, np.arange(len(attrs))]
    out = []
    for c, a in enumerate(attrs):
        if np.isfinite(best[c]):
            lo, hi = xs[pos[c], c], xs[pos[c] + 1, c]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            out.append(_Split(int(a), float(best[c]), float(thr)))
    return out


def _best_categorical(col: np.ndarray, y: np.ndarray, attr: int, n_cats: int, min_leaf: int):
    n = col.size
    ci = col.astype(np.int64)
    cnt = np.bincount(ci, minlength=n_cats).astype(float)
    c1 = np.bincount(ci, weights=y, minlength=n_cats)
    tot1 = y.sum()
    nl, l1 = cnt, c1
    l0 = nl - l1
    nr = n - nl
    r1 = tot1 - l1
    r0 = nr - r1
    valid = (nl >= min_leaf) & (nr >= min_leaf) & (nl > 0) & (nr > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr
    score = np.where(valid, score, -np.inf)
    c = int(np.argmax(score))
    if not np.isfinite(score[c]):
        return None
    return _Split(attr, float(score[c]), category=c)


def find_best_split(X: np.ndarray, y: np.ndarray, attrs, is_cat: np.ndarray,
                    n_cats: np.ndarray, min_leaf: int) -> _Split | None:
    """Best Gini split over ``attrs`` (ascending); ties go to the lowest attribute, then threshold."""
    attrs = np.asarray(attrs, dtype=np.int64)
    cands = []
    num = attrs[~is_cat[attrs]]
    if num.size:
        cands += _best_numeric(X[:, num], y, num, min_leaf)
    for a in attrs[is_cat[attrs]]:
        s = _best_categorical(X[:, a], y, int(a), int(n_cats[a]), min_leaf)
        if s is not None:
            cands.append(s)
    if not cands:
        return None
    best = None
    for s in sorted(cands, key=lambda s: s.attribute):
        if best is None or s.score > best.score:
            best = s
    return best


class _Builder:
    def __init__(self, n_attributes):
        self.feature, self.threshold, self.categories = [], [], []
        self.left, self.right, self.counts = [], [], []
        self.n_attributes = n_attributes

    def add(self, counts) -> int:
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.categories.append(None)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(counts)
        return len(self.feature) - 1

    def build(self, algorithm, seed, meta=None) -> TreeModel:
        return TreeModel(np.array(self.feature, dtype=np.int64), np.array(self.threshold, dtype=float),
                         list(self.categories), np.array(self.left, dtype=np.int64),
                         np.array(self.right, dtype=np.int64),
                         np.array(self.counts, dtype=float).reshape(-1, 2), self.n_attributes,
                         algorithm, seed, dict(meta or {}))


def grow_tree(X: np.ndarray, y: np.ndarray, is_cat: np.ndarray, n_cats: np.ndarray,
              min_leaf: int = 1, k_attrs: int | None = None, rng: np.random.Generator | None = None,
              algorithm: str = "tree", seed: int | None = None) -> TreeModel:
    """Grow an unpruned tree greedily on Gini decrease.

    With ``k_attrs`` set, each node first examines a random sample of that many
    attributes; only when none of them offers a positive decrease are the
    remaining attributes examined too.  An impure node that no attribute can
    improve is still split on its best zero-decrease partition (this is what
    lets XOR-like structure be learned), and becomes a leaf only when no
    admissible partition exists at all.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, A = X.shape
    all_attrs = np.arange(A)
    b = _Builder(A)
    stack = [(np.arange(n), -1, False)]
    while stack:
        idx, parent, is_right = stack.pop()
        yi = y[idx]
        n1 = float(yi.sum())
        counts = (idx.size - n1, n1)
        node = b.add(counts)
        if parent >= 0:
            (b.right if is_right else b.left)[parent] = node
        if n1 == 0 or n1 == idx.size or idx.size < 2 * min_leaf:
            continue
        Xi = X[idx]
        parent_score = (counts[0] ** 2 + counts[1] ** 2) / idx.size
        if k_attrs is not None and k_attrs < A:
            first = np.sort(rng.choice(A, size=k_attrs, replace=False))
            split = find_best_split(Xi, yi, first, is_cat, n_cats, min_leaf)
            if split is None or split.score - parent_score <= _EPS_GAIN * idx.size:
                rest = np.setdiff1d(all_attrs, first)
                other = find_best_split(Xi, yi, rest, is_cat, n_cats, min_leaf)
                if other is not None and (split is None or other.score > split.score):
                    split = other
        else:
            split = find_best_split(Xi, yi, all_attrs, is_cat, n_cats, min_leaf)
        if split is None:
            continue
        b.feature[node] = split.attribute
        if split.category is not None:
            b.categories[node] = (split.category,)
            go_left = Xi[:, split.attribute] == split.category
        else:
            b.threshold[node] = split.threshold
            go_left = Xi[:, split.attribute] <= split.threshold
        stack.append((idx[~go_left], node, True))
        stack.append((idx[go_left], node, False))
    return b.build(algorithm, seed)


def schema_arrays(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    is_cat = np.array([not a.is_numeric for a in ds.attributes], dtype=bool)
    n_cats = np.array([len(a.categories) for a in ds.attributes], dtype=np.int64)
    return is_cat, n_cats


def compact(tree: TreeModel, terminal: np.ndarray, algorithm: str | None = None) -> TreeModel:
    """Copy of ``tree`` where nodes flagged in ``terminal`` become leaves."""
    b = _Builder(tree.n_attributes)
    stack = [(0, -1, False)]
    while stack:
        t, parent, is_right = stack.pop()
        node = b.add(tuple(tree.counts[t]))
        if parent >= 0:
            (b.right if is_right else b.left)[parent] = node
        if tree.feature[t] == LEAF or terminal[t]:
            continue
        b.feature[node] = int(tree.feature[t])
        b.threshold[node] = float(tree.threshold[t])
        b.categories[node] = tree.categories[t]
        stack.append((int(tree.right[t]), node, True))
        stack.append((int(tree.left[t]), node, False))
    return b.build(algorithm or tree.algorithm, tree.seed, tree.meta)
