"""The four base learners: CART, random tree, random forest and K*."""
from .cart import pruning_sequence, train_cart
from .config import CartConfig, ForestConfig, KStarConfig, RandomTreeConfig, TrainConfig
from .forest import ForestModel, train_random_forest, train_random_tree
from .kstar import KStarModel, kstar_predict, train_kstar
from .tree import LearnerError, SplitPredicate, TreeModel, gini

import numpy as np


def predict_tree(m, x) -> np.ndarray:
    """Class distribution of a tree or forest for one instance (or a 2-D batch)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return m.predict_proba(x.reshape(1, -1))[0]
    return m.predict_proba(x)


__all__ = [
    "CartConfig", "ForestConfig", "ForestModel", "KStarConfig", "KStarModel", "LearnerError",
    "RandomTreeConfig", "SplitPredicate", "TrainConfig", "TreeModel", "gini", "kstar_predict",
    "predict_tree", "pruning_sequence", "train_cart", "train_kstar", "train_random_forest",
    "train_random_tree",
]
