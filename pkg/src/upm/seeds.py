"""Deterministic seed derivation.

Child seeds are produced by a SplitMix64 finalizer applied to the parent seed
and a child index, so any component (a forest member, a CV fold, a cohort)
can be rebuilt in isolation and in any execution order.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive(seed: int, *path: int | str) -> int:
    """Derive a 64-bit child seed from ``seed`` along a path of keys."""
    s = splitmix64(int(seed) & MASK64)
    for key in path:
        if isinstance(key, str):
            k = 0
            for ch in key.encode("utf-8"):
                k = splitmix64(k ^ ch)
        else:
            k = int(key) & MASK64
        s = splitmix64(s ^ splitmix64(k))
    return s
