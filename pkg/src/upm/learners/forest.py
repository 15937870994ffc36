from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from ..seeds import derive
from .config import TrainConfig
from .tree import TreeModel, check_trainable, grow_tree, schema_arrays


def train_random_tree(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> TreeModel:
    """Unpruned tree that scores a seeded sample of ``k_attrs`` attributes per node."""
    check_trainable(ds)
    return _random_tree(ds.values, ds.labels, ds, cfg, cfg.seed)


def _random_tree(X, y, ds, cfg, seed) -> TreeModel:
    is_cat, n_cats = schema_arrays(ds)
    k = cfg.rtree.resolve_k(ds.n_attributes)
    rng = np.random.default_rng(seed)
    t = grow_tree(X, y, is_cat, n_cats, min_leaf=cfg.rtree.min_leaf, k_attrs=k, rng=rng,
                  algorithm="random_tree", seed=seed)
    t.meta = {"k_attrs": k, "min_leaf": cfg.rtree.min_leaf}
    return t


@dataclass(eq=False)
class ForestModel:
    trees: list
    seeds: list
    bootstrap: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_attributes(self) -> int:
        return self.trees[0].n_attributes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros((np.asarray(X).shape[0], 2))
        for t in self.trees:
            acc += t.predict_proba(X)
        return acc / self.n_trees

    def to_dict(self) -> dict:
        return {"seeds": [int(s) for s in self.seeds], "bootstrap": self.bootstrap,
                "meta": self.meta, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls([TreeModel.from_dict(t) for t in d["trees"]], [int(s) for s in d["seeds"]],
                   bool(d.get("bootstrap", True)), dict(d.get("meta", {})))


def member_seed(seed: int, i: int) -> int:
    return derive(seed, "forest", i)


def train_random_forest(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> ForestModel:
    """Bag ``n_trees`` random trees, each on its own bootstrap resample.

    Member ``i`` draws both its resample and its attribute samples from
    :func:`member_seed`, so members can be trained in any order or in
    parallel and still reproduce the same forest.
    """
    check_trainable(ds)
    n = ds.n
    trees, seeds = [], []
    for i in range(cfg.forest.n_trees):
        s = member_seed(cfg.seed, i)
        if cfg.forest.bootstrap:
            rows = np.random.default_rng(derive(s, "bootstrap")).integers(0, n, size=n)
            X, y = ds.values[rows], ds.labels[rows]
        else:
            X, y = ds.values, ds.labels
        trees.append(_random_tree(X, y, ds, cfg, s))
        seeds.append(s)
    return ForestModel(trees, seeds, cfg.forest.bootstrap,
                       {"n_trees": cfg.forest.n_trees, "k_attrs": cfg.rtree.resolve_k(ds.n_attributes)})
