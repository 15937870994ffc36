"""Shared oracles and tiny datasets for the tests."""
import numpy as np

from upm.data import CATEGORICAL, NUMERIC, AttributeDescriptor, Dataset


def pair_metrics(actual, predicted):
    """Brute-force accuracy / weighted F1 / kappa by looping over (actual, predicted) pairs."""
    actual = [int(a) for a in actual]
    predicted = [int(p) for p in predicted]
    n = len(actual)
    correct = sum(1 for a, p in zip(actual, predicted) if a == p)
    f1_total = 0.0
    chance = 0.0
    for c in (0, 1):
        tp = sum(1 for a, p in zip(actual, predicted) if a == c and p == c)
        n_pred = sum(1 for p in predicted if p == c)
        n_act = sum(1 for a in actual if a == c)
        prec = tp / n_pred if n_pred else 0.0
        rec = tp / n_act if n_act else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        f1_total += n_act / n * f1
        chance += (n_act / n) * (n_pred / n)
    po = correct / n
    if chance == 1.0:
        k = 1.0 if po == 1.0 else 0.0
    else:
        k = (po - chance) / (1 - chance)
    return {"accuracy_pct": 100 * po, "f1_weighted_pct": 100 * f1_total, "kappa": k}


def numeric_dataset(X, y, names=None, name="toy"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    names = names or [f"x{j}" for j in range(X.shape[1])]
    attrs = tuple(AttributeDescriptor(n, NUMERIC, j) for j, n in enumerate(names))
    return Dataset(attrs, X, np.zeros(X.shape, bool), np.asarray(y), name=name)


def separable_cohort(n, seed=0, noise_attrs=3):
    """One attribute separates the classes with a margin; the rest is noise plus a categorical."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    rng.shuffle(y)
    signal = np.where(y == 0, rng.uniform(0.0, 0.4, n), rng.uniform(0.6, 1.0, n))
    cols = [signal] + [rng.normal(size=n) for _ in range(noise_attrs)]
    cat = rng.integers(0, 3, n)
    X = np.column_stack(cols + [cat])
    attrs = [AttributeDescriptor("Signal", NUMERIC, 0)]
    attrs += [AttributeDescriptor(f"Noise{j}", NUMERIC, j + 1) for j in range(noise_attrs)]
    attrs.append(AttributeDescriptor("Group", CATEGORICAL, noise_attrs + 1, ("a", "b", "c")))
    return Dataset(tuple(attrs), X, np.zeros(X.shape, bool), y, name=f"separable{n}")


def separable_spec(n=300, seed=42):
    """Synthgen cohort with a near-deterministic label (realized Bayes ~98%).

    All six aptitude anchors stay informative and the classes are balanced, so
    a learner that finds no signal scores about 50% whatever its guessing rate.
    """
    from upm.synthgen import CohortSpec

    return CohortSpec("Separable", n, seed=seed, signal_strength=40.0, positive_rate=0.5, missing_rate=0.0)
