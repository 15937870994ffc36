"""The voting ensemble: preprocessing transform plus four base learners."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .data import CLASSES, DataError, Dataset, class_distribution
from .learners import (ForestModel, KStarModel, TrainConfig, TreeModel, train_cart, train_kstar,
                       train_random_forest, train_random_tree)
from .preprocess import PrepConfig, CleanConfig, Transform, apply_transform, fit_preprocessing
from .seeds import derive

MODEL_FORMAT = "upm-model-v1"
AVERAGE = "average_of_probabilities"
MAJORITY = "majority_vote"
RULES = (AVERAGE, MAJORITY)
MEMBERS = ("cart", "rtree", "forest", "kstar")


@dataclass(frozen=True)
class PipelineConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    prep: PrepConfig = field(default_factory=PrepConfig)
    rule: str = AVERAGE
    folds: int = 10
    global_prep: bool = False

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")

    @property
    def seed(self) -> int:
        return self.train.seed

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, train=self.train.with_seed(seed))

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "prep": {"clean": vars(self.prep.clean).copy(), "k": self.prep.k, "max_k": self.prep.max_k},
            "rule": self.rule,
            "folds": self.folds,
            "global_prep": self.global_prep,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        p = d.get("prep", {})
        prep = PrepConfig(CleanConfig(**p.get("clean", {})), p.get("k"), p.get("max_k", 15))
        return cls(TrainConfig.from_dict(d.get("train", {})), prep, d.get("rule", AVERAGE),
                   int(d.get("folds", 10)), bool(d.get("global_prep", False)))


@dataclass
class CombinedPrediction:
    label: int
    distribution: np.ndarray
    members: dict
    tie_break: str | None = None

    @property
    def class_name(self) -> str:
        return CLASSES[self.label]


def combine(member_dists, rule: str = AVERAGE, tie_fallback: int = 0) -> CombinedPrediction:
    """Combine four member distributions (a mapping or a sequence).

    Under majority voting each member votes for its argmax; a 2-2 split goes
    to the class with the higher mean probability and, failing that, to
    ``tie_fallback`` (the training majority class).
    """
    if isinstance(member_dists, dict):
        names = list(member_dists)
        dists = np.array([member_dists[k] for k in names], dtype=float)
    else:
        dists = np.array(member_dists, dtype=float)
        names = list(MEMBERS[:len(dists)]) if len(dists) <= len(MEMBERS) else [f"m{i}" for i in range(len(dists))]
    if dists.ndim != 2 or dists.shape[1] != 2:
        raise ValueError("member distributions must be 2-vectors")
    mean = dists.mean(axis=0)
    tie = None
    if rule == AVERAGE:
        out = mean
        label = int(np.argmax(out))
        if out[0] == out[1]:
            label, tie = int(tie_fallback), "fallback"
    elif rule == MAJORITY:
        votes = np.bincount(np.argmax(dists, axis=1), minlength=2)
        out = votes / votes.sum()
        if votes[0] != votes[1]:
            label = int(np.argmax(votes))
        elif mean[0] != mean[1]:
            label, tie = int(np.argmax(mean)), "mean_probability"
        else:
            label, tie = int(tie_fallback), "fallback"
    else:
        raise ValueError(f"unknown combination rule {rule!r}")
    return CombinedPrediction(label, out, dict(zip(names, dists)), tie)


def combine_batch(member_probs: dict, rule: str, tie_fallback: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`combine` over rows; returns (labels, distributions)."""
    stack = np.stack([member_probs[k] for k in MEMBERS], axis=0)  # (4, n, 2)
    mean = stack.mean(axis=0)
    if rule == AVERAGE:
        labels = np.where(mean[:, 0] > mean[:, 1], 0, np.where(mean[:, 0] < mean[:, 1], 1, tie_fallback))
        return labels.astype(np.int64), mean
    votes_placed = (np.argmax(stack, axis=2) == 0).sum(axis=0)
    votes = np.stack([votes_placed, len(MEMBERS) - votes_placed], axis=1)
    dist = votes / len(MEMBERS)
    by_mean = np.where(mean[:, 0] > mean[:, 1], 0, np.where(mean[:, 0] < mean[:, 1], 1, tie_fallback))
    labels = np.where(votes[:, 0] > votes[:, 1], 0, np.where(votes[:, 0] < votes[:, 1], 1, by_mean))
    return labels.astype(np.int64), dist


@dataclass(eq=False)
class EnsembleModel:
    transform: Transform
    cart: TreeModel
    rtree: TreeModel
    forest: ForestModel
    kstar: KStarModel
    rule: str
    seed: int
    config: PipelineConfig
    majority_class: int
    selected: tuple = ()

    @property
    def members(self) -> dict:
        return {"cart": self.cart, "rtree": self.rtree, "forest": self.forest, "kstar": self.kstar}

    def member_proba(self, ds: Dataset) -> dict:
        """Member distributions for raw-schema rows."""
        X = apply_transform(self.transform, ds).values
        return {k: m.predict_proba(X) for k, m in self.members.items()}

    def predict_batch(self, ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
        return combine_batch(self.member_proba(ds), self.rule, self.majority_class)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "rule": self.rule,
            "seed": int(self.seed),
            "majority_class": CLASSES[self.majority_class],
            "selected": list(self.selected),
            "config": self.config.to_dict(),
            "transform": self.transform.to_dict(),
            "members": {
                "cart": self.cart.to_dict(),
                "rtree": self.rtree.to_dict(),
                "forest": self.forest.to_dict(),
                "kstar": self.kstar.to_dict(),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleModel":
        if d.get("format") != MODEL_FORMAT:
            raise DataError(f"not a {MODEL_FORMAT} document")
        m = d["members"]
        return cls(Transform.from_dict(d["transform"]), TreeModel.from_dict(m["cart"]),
                   TreeModel.from_dict(m["rtree"]), ForestModel.from_dict(m["forest"]),
                   KStarModel.from_dict(m["kstar"]), d["rule"], int(d["seed"]),
                   PipelineConfig.from_dict(d["config"]), CLASSES.index(d["majority_class"]),
                   tuple(d.get("selected", ())))


def save_model(m: EnsembleModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(m.dumps())
        fh.write("\n")


def load_model(path) -> EnsembleModel:
    with open(path) as fh:
        return EnsembleModel.from_dict(json.load(fh))


def _majority(ds: Dataset) -> int:
    counts = np.bincount(ds.labels, minlength=2)
    return int(np.argmax(counts))


TRAINERS = {"cart": train_cart, "rtree": train_random_tree,
            "forest": train_random_forest, "kstar": train_kstar}


def train_member(ds: Dataset, cfg: PipelineConfig, name: str, seed: int | None = None):
    """Train one member with the seed the ensemble would give it."""
    if name not in TRAINERS:
        raise ValueError(f"unknown member {name!r}; expected one of {MEMBERS}")
    seed = cfg.seed if seed is None else seed
    return TRAINERS[name](ds, cfg.train.with_seed(derive(seed, name) & 0x7FFFFFFFFFFFFFFF))


def train_members(ds: Dataset, cfg: PipelineConfig, seed: int) -> dict:
    out = {}
    for name in MEMBERS:
        try:
            out[name] = train_member(ds, cfg, name, seed)
        except Exception as exc:
            raise RuntimeError(f"member {name!r} failed to train: {exc}") from exc
    return out


def train_upm(ds_raw: Dataset, cfg: PipelineConfig = PipelineConfig(),
              prefit: tuple[Dataset, Transform] | None = None) -> EnsembleModel:
    """Fit preprocessing on ``ds_raw`` and train the four members on its output.

    ``prefit`` supplies an already fitted ``(reduced_dataset, transform)``
    pair; cross-validation uses it for the global-preprocessing mode.
    """
    dist = class_distribution(ds_raw)
    if min(dist.values()) == 0:
        raise DataError(f"{ds_raw.name}: both classes are required to train, got {dist}")
    seed = cfg.seed
    if prefit is None:
        reduced, transform, _ = fit_preprocessing(ds_raw, cfg.prep, derive(seed, "prep") & 0x7FFFFFFF)
    else:
        reduced, transform = prefit
    members = train_members(reduced, cfg, seed)
    return EnsembleModel(transform, members["cart"], members["rtree"], members["forest"],
                         members["kstar"], cfg.rule, seed, cfg, _majority(ds_raw),
                         tuple(reduced.attribute_names))


def predict(m: EnsembleModel, x_raw: Dataset | np.ndarray) -> CombinedPrediction:
    """Predict one raw-schema instance (a one-row Dataset or a value vector)."""
    if not isinstance(x_raw, Dataset):
        vals = np.asarray(x_raw, dtype=float).reshape(1, -1)
        if vals.shape[1] != len(m.transform.raw_schema):
            raise DataError("instance does not match the model's raw schema")
        x_raw = Dataset(m.transform.raw_schema, np.nan_to_num(vals), np.isnan(vals), np.zeros(1))
    if x_raw.n != 1:
        raise DataError("predict takes a single instance")
    probs = m.member_proba(x_raw)
    return combine({k: v[0] for k, v in probs.items()}, m.rule, m.majority_class)
