"""Classification and regression trees with minimal cost-complexity pruning.

The grown tree is pruned along its weakest-link sequence.  The complexity
parameter is chosen by internal stratified cross-validation on the training
data, optionally taking the simplest tree within one standard error of the
best cross-validated error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset, stratified_kfold
from ..seeds import derive
from .config import TrainConfig
from .tree import LEAF, TreeModel, check_trainable, compact, grow_tree, schema_arrays

_TOL = 1e-12


@dataclass
class PruneStep:
    alpha: float
    terminal: np.ndarray  # nodes that are leaves in this subtree
    n_leaves: int


def _levels(tree: TreeModel) -> list[np.ndarray]:
    depth = tree.node_depths()
    return [np.flatnonzero(depth == d) for d in range(int(depth.max()) + 1)]


def _subtree_stats(tree, terminal, levels, node_err):
    """Resubstitution errors and leaf counts of every node's current subtree."""
    err = np.zeros(tree.n_nodes)
    leaves = np.zeros(tree.n_nodes)
    for nodes in reversed(levels):
        term = terminal[nodes]
        t = nodes[term]
        err[t] = node_err[t]
        leaves[t] = 1
        s = nodes[~term]
        err[s] = err[tree.left[s]] + err[tree.right[s]]
        leaves[s] = leaves[tree.left[s]] + leaves[tree.right[s]]
    return err, leaves


def _alive(tree, terminal, levels):
    alive = np.zeros(tree.n_nodes, dtype=bool)
    alive[0] = True
    for nodes in levels:
        open_ = nodes[alive[nodes] & ~terminal[nodes]]
        alive[tree.left[open_]] = True
        alive[tree.right[open_]] = True
    return alive


def pruning_sequence(tree: TreeModel) -> list[PruneStep]:
    """Weakest-link pruning sequence with non-decreasing complexity parameters.

    Step 0 is the smallest subtree with the grown tree's training error
    (alpha = 0); the last step is the root alone.
    """
    node_err = tree.counts.sum(axis=1) - tree.counts.max(axis=1)
    levels = _levels(tree)
    terminal = tree.feature == LEAF
    steps = []
    alpha = 0.0
    while True:
        while True:
            err, leaves = _subtree_stats(tree, terminal, levels, node_err)
            alive = _alive(tree, terminal, levels)
            internal = np.flatnonzero(alive & ~terminal)
            if internal.size == 0:
                break
            g = (node_err[internal] - err[internal]) / (leaves[internal] - 1)
            weakest = internal[g <= alpha + _TOL]
            if weakest.size == 0:
                break
            terminal = terminal.copy()
            terminal[weakest] = True
        alive = _alive(tree, terminal, levels)
        steps.append(PruneStep(alpha, terminal.copy(), int((alive & terminal).sum())))
        if internal.size == 0:
            return steps
        alpha = max(alpha, float(g.min()))


def _step_for(seq: list[PruneStep], alpha: float) -> PruneStep:
    chosen = seq[0]
    for s in seq:
        if s.alpha <= alpha + _TOL:
            chosen = s
    return chosen


def _predict_with(tree: TreeModel, terminal: np.ndarray, paths: np.ndarray) -> np.ndarray:
    padded = np.append(terminal, True)  # path padding (-1) maps to the appended entry
    flags = padded[paths]
    first = np.argmax(flags, axis=1)
    nodes = paths[np.arange(paths.shape[0]), first]
    c = tree.counts[nodes]
    return (c[:, 1] > c[:, 0]).astype(np.int64)


def _grow_cart(ds: Dataset, cfg: TrainConfig, seed) -> TreeModel:
    is_cat, n_cats = schema_arrays(ds)
    return grow_tree(ds.values, ds.labels, is_cat, n_cats, min_leaf=cfg.cart.min_leaf,
                     algorithm="cart", seed=seed)


def train_cart(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> TreeModel:
    """Grow a Gini tree and prune it by cross-validated cost-complexity."""
    check_trainable(ds)
    full = _grow_cart(ds, cfg, cfg.seed)
    meta = {"min_leaf": cfg.cart.min_leaf, "pruned": False, "grown_leaves": full.n_leaves}
    if not cfg.cart.prune or full.n_leaves == 1:
        full.meta = meta
        return full

    seq = pruning_sequence(full)
    alphas = np.array([s.alpha for s in seq])
    betas = np.append(np.sqrt(alphas[:-1] * alphas[1:]), np.inf)

    counts = np.bincount(ds.labels, minlength=2)
    folds = min(cfg.cart.prune_folds, ds.n)
    cv_err = np.zeros(len(seq))
    if counts.min() >= 1 and folds >= 2:
        plan = stratified_kfold(ds, folds, derive(cfg.seed, "cart-prune") & 0x7FFFFFFF)
        for train_idx, test_idx in plan.folds():
            tr = ds.subset(train_idx)
            te = ds.subset(test_idx)
            t = _grow_cart(tr, cfg, cfg.seed)
            fseq = pruning_sequence(t)
            paths = t.paths(te.values)
            for k, beta in enumerate(betas):
                pred = _predict_with(t, _step_for(fseq, beta).terminal, paths)
                cv_err[k] += np.sum(pred != te.labels)
    rate = cv_err / ds.n
    best = float(rate.min())
    if cfg.cart.one_se_rule:
        se = np.sqrt(best * (1.0 - best) / ds.n)
        chosen = int(np.flatnonzero(rate <= best + se + _TOL).max())
    else:
        chosen = int(np.flatnonzero(rate <= best + _TOL).max())

    pruned = compact(full, seq[chosen].terminal, "cart")
    meta.update(pruned=True, alpha=float(alphas[chosen]), alphas=[float(a) for a in alphas],
                cv_error=[float(r) for r in rate], chosen_step=chosen)
    pruned.meta = meta
    return pruned
