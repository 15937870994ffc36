"""Run configuration: a flat ``key = value`` file, overridable from the command line.

Every key, its type and its default is listed in :data:`KEYS`.  Blank lines and
lines starting with ``#`` are ignored; unknown keys are an error, as are values
that do not parse.  Example::

    # suite.conf
    seed = 42
    pipeline_seed = 1
    folds = 10
    rule = avg
    kstar.blend = 20
    forest.n_trees = 100
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .ensemble import AVERAGE, MAJORITY, PipelineConfig
from .learners import CartConfig, ForestConfig, KStarConfig, RandomTreeConfig, TrainConfig
from .preprocess import CleanConfig, PrepConfig
from .synthgen import (DEFAULT_APTITUDE_GAP, CohortSpec, DEFAULT_MISSING_RATE, DEFAULT_POSITIVE_RATE,
                       DEFAULT_PREPARED_FRACTION, DEFAULT_SIGNAL_STRENGTH)

RULE_ALIASES = {"avg": AVERAGE, "average": AVERAGE, AVERAGE: AVERAGE,
                "majority": MAJORITY, "vote": MAJORITY, MAJORITY: MAJORITY}
RULE_STYLES = ("markdown", "text", "csv")


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optional_int(s: str):
    return None if s.strip().lower() in ("auto", "none", "") else int(s)


def _paths(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def parse_rule(s: str) -> str:
    try:
        return RULE_ALIASES[s.strip().lower()]
    except KeyError:
        raise ValueError(f"rule must be avg or majority, got {s!r}") from None


def _choice(*options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {options}, got {s!r}")
        return s
    return parse


@dataclass(frozen=True)
class RunConfig:
    # master seed of the synthetic cohorts
    seed: int = 42
    # seed of fold plans and training; the cross-validation default is 1
    pipeline_seed: int = 1
    folds: int = 10
    rule: str = AVERAGE
    global_prep: bool = False
    out: str = "runs/latest"
    workers: int = 1
    inputs: tuple[str, ...] = ()
    synthetic: bool = False
    label_column: str = "placement_status"
    rule_style: str = "markdown"
    rule_member: str = "cart"
    # synthetic suite
    signal_strength: float = DEFAULT_SIGNAL_STRENGTH
    positive_rate: float = DEFAULT_POSITIVE_RATE
    missing_rate: float = DEFAULT_MISSING_RATE
    aptitude_gap: float = DEFAULT_APTITUDE_GAP
    prepared_fraction: float = DEFAULT_PREPARED_FRACTION
    # preprocessing
    max_missing_fraction: float = CleanConfig.max_missing_fraction
    impute: str = CleanConfig.impute
    drop_constant: bool = CleanConfig.drop_constant
    clusters: int | None = None
    max_clusters: int = PrepConfig.max_k
    # learners
    cart_min_leaf: int = CartConfig.min_leaf
    cart_prune: bool = CartConfig.prune
    cart_prune_folds: int = CartConfig.prune_folds
    cart_one_se_rule: bool = CartConfig.one_se_rule
    rtree_k_attrs: int | None = RandomTreeConfig.k_attrs
    rtree_min_leaf: int = RandomTreeConfig.min_leaf
    forest_n_trees: int = ForestConfig.n_trees
    forest_bootstrap: bool = ForestConfig.bootstrap
    kstar_blend: float = KStarConfig.blend
    kstar_max_iter: int = KStarConfig.max_iter

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.rule not in (AVERAGE, MAJORITY):
            raise ConfigError(f"unknown combination rule {self.rule!r}")
        if self.synthetic and self.inputs:
            raise ConfigError("give either input files or synthetic = true, not both")
        try:
            self.pipeline()
            CohortSpec("check", 2, **self.synth_params())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def pipeline(self) -> PipelineConfig:
        train = TrainConfig(
            seed=self.pipeline_seed,
            cart=CartConfig(self.cart_min_leaf, self.cart_prune_folds, self.cart_one_se_rule, self.cart_prune),
            rtree=RandomTreeConfig(self.rtree_k_attrs, self.rtree_min_leaf),
            forest=ForestConfig(self.forest_n_trees, self.forest_bootstrap),
            kstar=KStarConfig(self.kstar_blend, self.kstar_max_iter),
        )
        prep = PrepConfig(CleanConfig(self.max_missing_fraction, self.impute, self.drop_constant),
                          self.clusters, self.max_clusters)
        return PipelineConfig(train, prep, self.rule, self.folds, self.global_prep)

    def synth_params(self) -> dict:
        return {"signal_strength": self.signal_strength, "positive_rate": self.positive_rate,
                "missing_rate": self.missing_rate, "aptitude_gap": self.aptitude_gap,
                "prepared_fraction": self.prepared_fraction}

    def to_dict(self) -> dict:
        out = {}
        for key, (attr, _) in KEYS.items():
            v = getattr(self, attr)
            out[key] = list(v) if isinstance(v, tuple) else v
        return out

    def updated(self, **overrides) -> "RunConfig":
        """Copy with the non-None overrides applied (used for command-line flags)."""
        given = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(given) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown settings: {sorted(unknown)}")
        try:
            return replace(self, **given)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


# file key -> (RunConfig field, parser)
KEYS = {
    "seed": ("seed", int),
    "pipeline_seed": ("pipeline_seed", int),
    "folds": ("folds", int),
    "rule": ("rule", parse_rule),
    "global_prep": ("global_prep", _bool),
    "out": ("out", str),
    "workers": ("workers", int),
    "inputs": ("inputs", _paths),
    "synthetic": ("synthetic", _bool),
    "label_column": ("label_column", str),
    "rule_style": ("rule_style", _choice(*RULE_STYLES)),
    "rule_member": ("rule_member", _choice("cart", "rtree")),
    "synth.signal_strength": ("signal_strength", float),
    "synth.positive_rate": ("positive_rate", float),
    "synth.missing_rate": ("missing_rate", float),
    "synth.aptitude_gap": ("aptitude_gap", float),
    "synth.prepared_fraction": ("prepared_fraction", float),
    "clean.max_missing_fraction": ("max_missing_fraction", float),
    "clean.impute": ("impute", str),
    "clean.drop_constant": ("drop_constant", _bool),
    "prep.clusters": ("clusters", _optional_int),
    "prep.max_clusters": ("max_clusters", int),
    "cart.min_leaf": ("cart_min_leaf", int),
    "cart.prune": ("cart_prune", _bool),
    "cart.prune_folds": ("cart_prune_folds", int),
    "cart.one_se_rule": ("cart_one_se_rule", _bool),
    "rtree.k_attrs": ("rtree_k_attrs", _optional_int),
    "rtree.min_leaf": ("rtree_min_leaf", int),
    "forest.n_trees": ("forest_n_trees", int),
    "forest.bootstrap": ("forest_bootstrap", _bool),
    "kstar.blend": ("kstar_blend", float),
    "kstar.max_iter": ("kstar_max_iter", int),
}


def parse_config(text: str, source: str = "<config>") -> dict:
    """Field values named in ``text``; raises :class:`ConfigError` on any bad line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        attr, parse = KEYS[key]
        if attr in out:
            raise ConfigError(f"{source}:{lineno}: {key!r} given twice")
        try:
            out[attr] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def load_config(path: str | os.PathLike | None = None, **overrides) -> RunConfig:
    """Defaults, then the file at ``path``, then non-None ``overrides``."""
    settings = {}
    if path is not None:
        path = os.fspath(path)
        try:
            with open(path, encoding="utf-8") as fh:
                settings = parse_config(fh.read(), path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        base = RunConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return base.updated(**overrides)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, list):
            value = ",".join(value)
        elif value is None:
            value = "auto"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
