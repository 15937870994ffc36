"""IF-THEN rules read off a trained tree, one per leaf.

Each rule is the conjunction of the tests on the path from the root to a leaf.
Repeated tests of one attribute along a path are collapsed to the tightest
interval (numeric) or the surviving category set (categorical); this never
changes which instances a rule matches.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .data import CLASSES, DataError, Dataset
from .learners.tree import LEAF, TreeModel
from .preprocess import Transform

STYLES = ("text", "markdown", "csv")


@dataclass(frozen=True)
class Condition:
    """Collapsed constraint on one attribute: ``lower < x <= upper`` or ``x in allowed``."""

    attribute: int
    name: str
    lower: float = -np.inf
    upper: float = np.inf
    allowed: tuple[int, ...] | None = None
    category_names: tuple[str, ...] = ()
    # optional affine map from model units back to raw units (offset, span)
    raw: tuple[float, float] | None = None

    @property
    def is_numeric(self) -> bool:
        return self.allowed is None

    def matches(self, X: np.ndarray) -> np.ndarray:
        col = np.asarray(X)[:, self.attribute]
        if self.is_numeric:
            return (col > self.lower) & (col <= self.upper)
        return np.isin(col, self.allowed)

    def _num(self, v: float) -> str:
        if self.raw is not None:
            v = self.raw[0] + v * self.raw[1]
        return f"{v:.6g}"

    def render(self) -> list[str]:
        if self.is_numeric:
            parts = []
            if np.isfinite(self.lower):
                parts.append(f"{self.name} > {self._num(self.lower)}")
            if np.isfinite(self.upper):
                parts.append(f"{self.name} <= {self._num(self.upper)}")
            return parts
        names = [self.category_names[c] if c < len(self.category_names) else str(c) for c in self.allowed]
        excluded = [self.category_names[c] for c in range(len(self.category_names)) if c not in self.allowed]
        if len(names) == 1:
            return [f"{self.name} = {names[0]}"]
        if excluded and len(excluded) < len(names):
            if len(excluded) == 1:
                return [f"{self.name} != {excluded[0]}"]
            return [f"{self.name} not in {{{', '.join(excluded)}}}"]
        return [f"{self.name} in {{{', '.join(names)}}}"]


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    label: int
    coverage: int
    confidence: float
    leaf: int
    path: tuple = ()          # (SplitPredicate, branch_taken_left) pairs, root first

    @property
    def class_name(self) -> str:
        return CLASSES[self.label]

    @property
    def n_conditions(self) -> int:
        return sum(len(c.render()) for c in self.conditions)

    def matches(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.ones(X.shape[0], dtype=bool)
        for c in self.conditions:
            out &= c.matches(X)
        return out

    def condition_text(self) -> str:
        parts = [p for c in self.conditions for p in c.render()]
        return " AND ".join(parts) if parts else "TRUE"

    def text(self) -> str:
        return (f"IF {self.condition_text()} THEN {self.class_name}  "
                f"[coverage={self.coverage}, confidence={self.confidence:.4f}]")


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    source: str = "cart"
    n_train: int = 0
    extras: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def match_matrix(self, X: np.ndarray) -> np.ndarray:
        """Boolean (n_rows, n_rules) matrix of which rules fire on each row."""
        return np.stack([r.matches(X) for r in self.rules], axis=1)

    def classify(self, X: np.ndarray) -> np.ndarray:
        """Class of the (single) rule firing on each row."""
        m = self.match_matrix(X)
        fired = m.sum(axis=1)
        if (fired != 1).any():
            raise DataError("rules do not partition the input: a row fired "
                            f"{int(fired.min())}..{int(fired.max())} rules")
        labels = np.array([r.label for r in self.rules])
        return labels[np.argmax(m, axis=1)]


def _collapse(path, schema, transform: Transform | None) -> tuple[Condition, ...]:
    bounds: dict[int, list] = {}
    order: list[int] = []
    for pred, went_left in path:
        a = pred.attribute
        if a not in bounds:
            order.append(a)
            attr = schema[a]
            bounds[a] = [-np.inf, np.inf, None if attr.is_numeric else set(range(len(attr.categories)))]
        b = bounds[a]
        if pred.is_numeric:
            if went_left:
                b[1] = min(b[1], pred.threshold)
            else:
                b[0] = max(b[0], pred.threshold)
        else:
            cats = set(pred.categories)
            b[2] = b[2] & cats if went_left else b[2] - cats
    out = []
    for a in order:
        attr = schema[a]
        lo, hi, allowed = bounds[a]
        raw = None
        if transform is not None and attr.is_numeric and transform.scale[a] is not None:
            smin, smax = transform.scale[a]
            raw = (smin, smax - smin)
        if allowed is None:
            out.append(Condition(a, attr.name, lo, hi, raw=raw))
        else:
            out.append(Condition(a, attr.name, allowed=tuple(sorted(allowed)),
                                 category_names=tuple(attr.categories)))
    return tuple(out)


def _leaf_paths(t: TreeModel):
    """(leaf, path) pairs in preorder, where path lists (predicate, went_left)."""
    stack = [(0, ())]
    while stack:
        node, path = stack.pop()
        if t.feature[node] == LEAF:
            yield node, path
            continue
        pred = t.predicate(node)
        stack.append((int(t.right[node]), path + ((pred, False),)))
        stack.append((int(t.left[node]), path + ((pred, True),)))


def extract_rules(t: TreeModel, ds_train: Dataset, transform: Transform | None = None,
                  source: str | None = None) -> RuleSet:
    """One rule per leaf, scored on ``ds_train`` and ordered by confidence x coverage.

    ``transform``, when given, is the preprocessing that produced
    ``ds_train``; numeric thresholds are then printed in raw units.  Rules
    always evaluate in model units.
    """
    if ds_train.n_attributes != t.n_attributes:
        raise DataError(f"tree expects {t.n_attributes} attributes, dataset has {ds_train.n_attributes}")
    if transform is not None and len(transform.kept) != ds_train.n_attributes:
        raise DataError("transform does not match the training schema")
    X, y = ds_train.values, ds_train.labels
    dist = t.leaf_distributions()
    raw_rules = []
    for preorder, (leaf, path) in enumerate(_leaf_paths(t)):
        conds = _collapse(path, ds_train.attributes, transform)
        label = int(np.argmax(dist[leaf]))
        rule = Rule(conds, label, 0, 0.0, int(leaf), path)
        hit = rule.matches(X)
        cov = int(hit.sum())
        conf = float(np.mean(y[hit] == label)) if cov else 0.0
        raw_rules.append((preorder, Rule(conds, label, cov, conf, int(leaf), path)))
    raw_rules.sort(key=lambda pr: (-pr[1].confidence * pr[1].coverage, pr[1].n_conditions, pr[0]))
    return RuleSet(tuple(r for _, r in raw_rules), source or t.algorithm, ds_train.n)


def format_rules(rs: RuleSet, style: str = "text") -> str:
    if style == "text":
        return "".join(r.text() + "\n" for r in rs.rules)
    if style == "markdown":
        lines = [f"# Rules ({rs.source}, {len(rs.rules)} rules, {rs.n_train} training instances)", "",
                 "| # | conditions | class | coverage | confidence |",
                 "|---|---|---|---|---|"]
        for i, r in enumerate(rs.rules, 1):
            cond = r.condition_text().replace("|", "\\|")
            lines.append(f"| {i} | {cond} | {r.class_name} | {r.coverage} | {r.confidence:.4f} |")
        return "\n".join(lines) + "\n"
    if style == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rule_id", "conditions", "class", "coverage", "confidence"])
        for i, r in enumerate(rs.rules, 1):
            w.writerow([i, r.condition_text(), r.class_name, r.coverage, f"{r.confidence:.4f}"])
        return buf.getvalue()
    raise ValueError(f"style must be one of {STYLES}, got {style!r}")


def rules_for_model(model, ds_train: Dataset, member: str = "cart") -> list[RuleSet]:
    """Rule sets for an ensemble member: ``cart``, ``rtree`` or every ``forest`` tree."""
    if member == "forest":
        return [extract_rules(tr, ds_train, model.transform, source=f"forest[{i}]")
                for i, tr in enumerate(model.forest.trees)]
    if member not in ("cart", "rtree"):
        raise ValueError("rules come from 'cart', 'rtree' or 'forest'")
    return [extract_rules(getattr(model, member), ds_train, model.transform, source=member)]
