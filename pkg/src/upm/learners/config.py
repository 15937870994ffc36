from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace


@dataclass(frozen=True)
class CartConfig:
    min_leaf: int = 2
    prune_folds: int = 5
    one_se_rule: bool = True
    prune: bool = True


@dataclass(frozen=True)
class RandomTreeConfig:
    # None means floor(log2(A)) + 1 for A attributes
    k_attrs: int | None = None
    min_leaf: int = 1

    def resolve_k(self, n_attributes: int) -> int:
        k = self.k_attrs if self.k_attrs is not None else int(math.floor(math.log2(n_attributes))) + 1
        return max(1, min(k, n_attributes))


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    bootstrap: bool = True


@dataclass(frozen=True)
class KStarConfig:
    blend: float = 20.0
    max_iter: int = 64


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 1
    cart: CartConfig = field(default_factory=CartConfig)
    rtree: RandomTreeConfig = field(default_factory=RandomTreeConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    kstar: KStarConfig = field(default_factory=KStarConfig)

    def __post_init__(self):
        counts = {
            "cart.min_leaf": self.cart.min_leaf,
            "cart.prune_folds": self.cart.prune_folds,
            "rtree.min_leaf": self.rtree.min_leaf,
            "forest.n_trees": self.forest.n_trees,
        }
        if self.rtree.k_attrs is not None:
            counts["rtree.k_attrs"] = self.rtree.k_attrs
        for key, v in counts.items():
            if v < 1:
                raise ValueError(f"{key} must be >= 1, got {v}")
        if self.cart.prune and self.cart.prune_folds < 2:
            raise ValueError("cart.prune_folds must be >= 2 when pruning")
        if not 0.0 < self.kstar.blend <= 100.0:
            raise ValueError(f"kstar.blend must lie in (0, 100], got {self.kstar.blend}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(seed=int(d.get("seed", 1)),
                   cart=CartConfig(**d.get("cart", {})),
                   rtree=RandomTreeConfig(**d.get("rtree", {})),
                   forest=ForestConfig(**d.get("forest", {})),
                   kstar=KStarConfig(**d.get("kstar", {})))
