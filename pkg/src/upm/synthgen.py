"""Synthetic placement cohorts shaped like the 17 state datasets.

Real student records are not available, so cohorts are drawn from a documented
generative model whose best attainable accuracy is known.  The 150 attributes
fall into natural groups:

* aptitude (informative): ``LogicalScore``, ``LogicalPct``, ``EnglishScore``,
  ``EnglishPct``, ``QuantScore``, ``QuantPct``.  Each anchors a block of five
  section sub-scores (``LogicalScore_Sec1`` ...) correlated 0.7 with it; the
  sub-scores carry no signal beyond what they inherit from the anchor.
* academic, cognitive and psychometric families of 27-30 numerics, each driven
  by one latent factor and each ending in a near-duplicate (|r| >= 0.95) of
  an earlier member.
* a demographic family mixing numerics with ten categoricals binned from the
  same latent factor.

Aptitude is a two-group mixture: a ``prepared_fraction`` of students sits
``aptitude_gap`` within-group standard deviations higher on every informative
attribute, everyone else follows the unshifted normal, and each state adds its
own mean shift.  Labels depend only on the informative attributes:
``P(Placed) = sigmoid(beta * s + c)``, where ``s`` is the standardized sum of
the informative values (``link="weakest"`` uses their minimum instead, a
sectional cut-off).  ``c`` is solved by bisection so the cohort's expected
placement rate equals ``positive_rate``, and labels are drawn systematically
(see :func:`systematic_draw`) so the realized count sits within one student
of it.  Informative values and labels come from their
own random streams before any nuisance attribute is drawn, so nuisance
columns never influence the label vector.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .data import CATEGORICAL, NUMERIC, PLACED, UNPLACED, AttributeDescriptor, Dataset
from .seeds import derive

INFORMATIVE = ("LogicalScore", "LogicalPct", "EnglishScore", "EnglishPct", "QuantScore", "QuantPct")

# rows of the state table: name, instance count
TABLE1 = (
    ("Andhra Pradesh", 516), ("Bihar", 411), ("Chhattisgarh", 439), ("Delhi", 460),
    ("Gujarat", 440), ("Haryana", 350), ("Jharkhand", 425), ("Karnataka", 310),
    ("Kerala", 261), ("Madhya Pradesh", 344), ("Maharashtra", 958), ("Punjab", 453),
    ("Rajasthan", 178), ("Tamil Nadu", 287), ("Uttar Pradesh", 1192), ("Uttarakhand", 104),
    ("West Bengal", 32),
)

# calibrated once with the Monte Carlo oracle so the Bayes accuracy is 90%
DEFAULT_SIGNAL_STRENGTH = 2.684
LINKS = ("weakest", "sum")
DEFAULT_LINK = "sum"
DEFAULT_APTITUDE_GAP = 2.0
DEFAULT_PREPARED_FRACTION = 0.3
DEFAULT_POSITIVE_RATE = 0.35
DEFAULT_MISSING_RATE = 0.01
MC_DRAWS = 400_000

SECTIONS_PER_ANCHOR = 5
SECTION_CORRELATION = 0.7

_ANCHOR_MEANS = {"Score": (58.0, 12.0), "Pct": (66.0, 9.0)}

# Nuisance families: every member loads on the family's latent factor, so the
# attribute space has one natural cluster per family.  Each family ends with a
# near-duplicate of an earlier member (name, source, scale).
_FAMILIES = {
    "academic": {
        "loading": 0.75, "mean": 7.2, "sd": 0.9,
        "members": ["SSC_Pct", "HSC_Pct", "Grad_Pct", "SSC_MathPct", "HSC_MathPct", "HSC_PhysicsPct",
                    "HSC_ChemPct"] + [f"Sem{k}_GPA" for k in range(1, 9)]
                   + ["Attendance_Pct", "Backlogs_Inv", "Project_Grade", "Internship_Grade",
                      "Seminar_Grade", "Lab_Avg", "Theory_Avg", "Assignment_Avg", "Midterm_Avg",
                      "Endterm_Avg", "Elective_GPA", "Core_GPA", "Viva_Avg", "SemAvg_GPA"],
        "duplicate": ("SemAvg_Pct", "SemAvg_GPA", 9.5),
    },
    "cognitive": {
        "loading": 0.7, "mean": 50.0, "sd": 10.0,
        "members": ["Memory", "Attention", "Reasoning", "Comprehension", "ProcessingSpeed",
                    "SpatialAbility", "ProblemSolving", "Creativity", "VerbalFluency",
                    "NumericalFacility", "PerceptualSpeed", "AbstractReasoning", "InductiveReasoning",
                    "DeductiveReasoning", "PatternRecognition", "DecisionMaking", "CriticalThinking",
                    "Planning", "Flexibility", "Inhibition", "Concentration", "VisualMemory",
                    "AuditoryMemory", "ReactionTime_Inv", "LearningAgility", "Curiosity",
                    "WorkingMemory"],
        "duplicate": ("WorkingMemory_Scaled", "WorkingMemory", 0.1),
    },
    "psychometric": {
        "loading": 0.7, "mean": 3.0, "sd": 0.6,
        "members": ["Openness", "Conscientiousness", "Extraversion", "Agreeableness",
                    "EmotionalStability", "Adaptability", "Leadership", "Teamwork", "SelfEfficacy",
                    "Resilience", "Grit", "Communication", "Empathy", "StressTolerance",
                    "Assertiveness", "Optimism", "Initiative", "TimeManagement", "Integrity",
                    "Sociability", "Persistence", "Confidence", "CareerClarity", "Sports_Activity",
                    "Cultural_Activity", "Volunteering", "Motivation"],
        "duplicate": ("Motivation_Scaled", "Motivation", 20.0),
    },
    "demographic": {
        "loading": 0.75, "mean": 0.0, "sd": 1.0,
        "members": ["FamilyIncomeLakh", "ParentEducationYears", "FatherEducationYears",
                    "MotherEducationYears", "HouseholdAssets", "InternetHours", "BooksAtHome",
                    "PocketMoney", "CoachingMonths", "ScholarshipInv", "TravelTimeMin_Inv",
                    "Siblings_Inv", "FamilySize_Inv", "UrbanIndex", "ComputerAtHome_Years",
                    "FirstGeneration_Inv", "HomeDistanceKm_Inv"],
        "duplicate": ("HomeDistanceMiles_Inv", "HomeDistanceKm_Inv", 0.621371),
        # demographic categoricals are binned from the same factor
        "categorical": (
            ("Gender", ("Female", "Male")),
            ("SocialCategory", ("GEN", "OBC", "SC", "ST")),
            ("Region", ("Rural", "SemiUrban", "Urban")),
            ("SchoolBoard", ("CBSE", "ICSE", "State")),
            ("Medium", ("English", "Hindi", "Regional")),
            ("FatherOccupation", ("Business", "Farming", "Service", "Other")),
            ("MotherOccupation", ("Homemaker", "Service", "Other")),
            ("IncomeBand", ("High", "Low", "Mid")),
            ("Hostel", ("No", "Yes")),
            ("Programme", ("BTech", "MCA")),
        ),
    },
}
CATEGORICAL_LOADING = 0.85


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class CohortSpec:
    state: str
    n_instances: int
    n_attributes: int = 150
    informative: tuple[str, ...] = INFORMATIVE
    extra_informative: tuple[str, ...] = ()
    signal_strength: float = DEFAULT_SIGNAL_STRENGTH
    positive_rate: float = DEFAULT_POSITIVE_RATE
    missing_rate: float = DEFAULT_MISSING_RATE
    seed: int = 0
    link: str = DEFAULT_LINK
    aptitude_gap: float = DEFAULT_APTITUDE_GAP
    prepared_fraction: float = DEFAULT_PREPARED_FRACTION

    def __post_init__(self):
        if self.n_instances < 2:
            raise GeneratorError("a cohort needs at least two instances")
        if self.signal_strength < 0:
            raise GeneratorError("signal strength must be non-negative")
        if not 0.0 < self.positive_rate < 1.0:
            raise GeneratorError("positive_rate must lie in (0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise GeneratorError("missing_rate must lie in [0, 1)")
        if set(self.informative) - set(INFORMATIVE):
            raise GeneratorError(f"informative attributes must come from {INFORMATIVE}")
        if self.link not in LINKS:
            raise GeneratorError(f"link must be one of {LINKS}")
        if self.aptitude_gap < 0:
            raise GeneratorError("aptitude_gap must be non-negative")
        if not 0.0 < self.prepared_fraction < 1.0:
            raise GeneratorError("prepared_fraction must lie in (0, 1)")
        if self.n_attributes < len(self.anchors):
            raise GeneratorError("n_attributes is smaller than the informative set")

    @property
    def anchors(self) -> tuple[str, ...]:
        return tuple(INFORMATIVE) + tuple(self.extra_informative)

    @property
    def signal_names(self) -> tuple[str, ...]:
        return tuple(self.informative) + tuple(self.extra_informative)


@dataclass
class GeneratorTruth:
    informative: list
    coefficients: dict
    intercept: float
    bayes_accuracy: float
    positive_rate_target: float
    realized_positive_rate: float
    realized_bayes_accuracy: float
    state_shift: dict
    seed: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "informative": list(self.informative),
            "coefficients": self.coefficients,
            "intercept": self.intercept,
            "bayes_accuracy": self.bayes_accuracy,
            "positive_rate_target": self.positive_rate_target,
            "realized_positive_rate": self.realized_positive_rate,
            "realized_bayes_accuracy": self.realized_bayes_accuracy,
            "state_shift": self.state_shift,
            "seed": self.seed,
            **self.extras,
        }


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def solve_intercept(s: np.ndarray, beta: float, rate: float, n_iter: int = 100) -> float:
    """Intercept making the mean of ``sigmoid(beta*s + c)`` equal ``rate``."""
    lo, hi = -60.0, 60.0
    if not _sigmoid(beta * s + lo).mean() < rate < _sigmoid(beta * s + hi).mean():
        raise GeneratorError(f"positive rate {rate} is unreachable")
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        if _sigmoid(beta * s + mid).mean() < rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def systematic_draw(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Dependent Bernoulli draws with marginals ``p`` and a near-fixed total.

    Instances are visited in random order and one uniform offset walks the
    running sum of ``p`` in unit steps; an instance is drawn when a step lands
    in its interval.  Each draw has probability exactly ``p[i]`` and the count
    differs from ``sum(p)`` by less than one.
    """
    order = rng.permutation(p.size)
    cum = np.concatenate([[0.0], np.cumsum(p[order])])
    u = rng.random()
    hit = np.ceil(cum[1:] - u) - np.ceil(cum[:-1] - u) > 0
    out = np.zeros(p.size, dtype=bool)
    out[order] = hit
    return out


def _combine(z: np.ndarray, link: str) -> np.ndarray:
    if z.shape[1] == 0:
        return np.zeros(z.shape[0])
    return z.min(axis=1) if link == "weakest" else z.sum(axis=1)


def _aptitude_draws(rng: np.random.Generator, n: int, k: int, gap: float, frac: float):
    """Standardized aptitude values for ``k`` signal attributes and the group flags.

    A fraction ``frac`` of students is prepared; their values are shifted up
    by ``gap`` within-group standard deviations on every signal attribute.
    The result has zero mean and unit variance per column.
    """
    e = rng.standard_normal((n, k))
    prepared = rng.random(n) < frac
    z = (gap * (prepared[:, None] - frac) + e) / np.sqrt(1.0 + gap * gap * frac * (1.0 - frac))
    return z, prepared


@lru_cache(maxsize=64)
def calibrate(beta: float, rate: float, n_signal: int = len(INFORMATIVE), link: str = DEFAULT_LINK,
              gap: float = DEFAULT_APTITUDE_GAP, frac: float = DEFAULT_PREPARED_FRACTION,
              draws: int = MC_DRAWS, seed: int = 20170) -> tuple[float, float, float, float]:
    """Monte Carlo calibration of the label model.

    Returns ``(bayes_accuracy_pct, intercept, combo_mean, combo_sd)``: the
    accuracy of the Bayes rule under the model, the intercept that hits the
    target placement rate, and the moments used to standardize the
    combination.
    """
    zm, _ = _aptitude_draws(np.random.default_rng(seed), draws, n_signal, gap, frac)
    raw = _combine(zm, link)
    mu, sd = float(raw.mean()), float(raw.std())
    sm = (raw - mu) / sd if sd > 0 else raw - mu
    c = solve_intercept(sm, beta, rate)
    p = _sigmoid(beta * sm + c)
    return float(100.0 * np.maximum(p, 1.0 - p).mean()), c, mu, (sd if sd > 0 else 1.0)


def bayes_accuracy(beta: float, rate: float, n_signal: int = len(INFORMATIVE), link: str = DEFAULT_LINK,
                   gap: float = DEFAULT_APTITUDE_GAP, frac: float = DEFAULT_PREPARED_FRACTION) -> float:
    """Best attainable accuracy (percent) under the label model."""
    return calibrate(float(beta), float(rate), n_signal, link, float(gap), float(frac))[0]


def _schema(spec: CohortSpec) -> list[tuple[str, str, tuple]]:
    """(name, role, detail) for every attribute, truncated to n_attributes."""
    cols = [(a, "anchor", ()) for a in spec.anchors]
    for a in INFORMATIVE:
        cols += [(f"{a}_Sec{k}", "section", (a,)) for k in range(1, SECTIONS_PER_ANCHOR + 1)]
    for fam, f in _FAMILIES.items():
        cols += [(n, "family", (fam,)) for n in f["members"]]
        cols += [(n, "categorical", (fam, cats)) for n, cats in f.get("categorical", ())]
        dup, src, scale = f["duplicate"]
        cols.append((dup, "duplicate", (src, scale)))
    k = 1
    while len(cols) < spec.n_attributes:
        cols.append((f"Extra_{k:02d}", "filler", ()))
        k += 1
    return cols[:spec.n_attributes]


def _binned(u: np.ndarray, n_cats: int) -> np.ndarray:
    """Equal-probability bins of a standard normal variable."""
    from scipy.special import ndtri

    cuts = ndtri(np.arange(1, n_cats) / n_cats)
    return np.searchsorted(cuts, u).astype(float)


def generate_cohort(spec: CohortSpec) -> tuple[Dataset, GeneratorTruth]:
    n = spec.n_instances
    anchors = spec.anchors
    shift_rng = np.random.default_rng(derive(spec.seed, "shift"))
    sig_rng = np.random.default_rng(derive(spec.seed, "informative"))
    lab_rng = np.random.default_rng(derive(spec.seed, "labels"))
    nui_rng = np.random.default_rng(derive(spec.seed, "nuisance"))
    miss_rng = np.random.default_rng(derive(spec.seed, "missing"))

    signal = [i for i, a in enumerate(anchors) if a in spec.signal_names]
    z = sig_rng.standard_normal((n, len(anchors)))
    z[:, signal], prepared = _aptitude_draws(sig_rng, n, len(signal), spec.aptitude_gap,
                                             spec.prepared_fraction)
    beta = spec.signal_strength
    bayes, c, combo_mu, sd = calibrate(float(beta), float(spec.positive_rate), len(signal), spec.link,
                                       float(spec.aptitude_gap), float(spec.prepared_fraction))
    s = (_combine(z[:, signal], spec.link) - combo_mu) / sd
    # the cohort's own intercept hits the target rate on its realized scores;
    # the population intercept is kept in the truth record
    c_model, c = c, solve_intercept(s, beta, spec.positive_rate)
    p_placed = _sigmoid(beta * s + c)
    placed = systematic_draw(p_placed, lab_rng)
    labels = np.where(placed, PLACED, UNPLACED)
    realized_bayes = float(100.0 * np.mean((p_placed >= 0.5) == placed))
    expected_bayes = float(100.0 * np.maximum(p_placed, 1.0 - p_placed).mean())

    shifts = {}
    columns = {}
    for i, a in enumerate(anchors):
        mean, sdv = _ANCHOR_MEANS["Pct" if a.endswith("Pct") else "Score"]
        shifts[a] = float(shift_rng.normal(0.0, 0.25 * sdv))
        columns[a] = np.round(mean + shifts[a] + sdv * z[:, i], 2)

    schema = _schema(spec)
    names = [name for name, _, _ in schema]
    factors = {fam: nui_rng.standard_normal(n) for fam in _FAMILIES}
    values = np.zeros((n, len(schema)))
    attrs = []
    rho = SECTION_CORRELATION
    for j, (name, role, detail) in enumerate(schema):
        if role == "anchor":
            col = columns[name]
        elif role == "section":
            zi = z[:, anchors.index(detail[0])]
            col = np.round(10.0 + 3.0 * (rho * zi + np.sqrt(1 - rho ** 2) * nui_rng.standard_normal(n)), 2)
        elif role == "family":
            f = _FAMILIES[detail[0]]
            load = f["loading"]
            u = load * factors[detail[0]] + np.sqrt(1 - load ** 2) * nui_rng.standard_normal(n)
            col = np.round(f["mean"] + f["sd"] * u, 2)
        elif role == "categorical":
            load = CATEGORICAL_LOADING
            u = load * factors[detail[0]] + np.sqrt(1 - load ** 2) * nui_rng.standard_normal(n)
            col = _binned(u, len(detail[1]))
        elif role == "duplicate":
            src, scale = detail
            base = values[:, names.index(src)]
            col = np.round(base * scale + nui_rng.normal(0.0, 0.02 * abs(scale) * (base.std() + 1e-12), n), 4)
        else:
            col = np.round(nui_rng.uniform(0.0, 10.0, n), 2)
        values[:, j] = col
        if role == "categorical":
            attrs.append(AttributeDescriptor(name, CATEGORICAL, j, tuple(detail[1])))
        else:
            attrs.append(AttributeDescriptor(name, NUMERIC, j))

    missing = miss_rng.random(values.shape) < spec.missing_rate
    ds = Dataset(tuple(attrs), values, missing, labels, name=spec.state, source=f"synthetic:{spec.seed}")
    coef = {anchors[i]: float(beta / sd) for i in signal}
    truth = GeneratorTruth(
        informative=list(spec.signal_names),
        coefficients=coef,
        intercept=float(c),
        bayes_accuracy=bayes,
        positive_rate_target=spec.positive_rate,
        realized_positive_rate=float(np.mean(placed)),
        realized_bayes_accuracy=realized_bayes,
        state_shift=shifts,
        seed=int(spec.seed),
        extras={"state": spec.state, "model_intercept": float(c_model), "n_instances": n, "n_attributes": len(schema),
                "signal_strength": beta, "missing_rate": spec.missing_rate, "link": spec.link,
                "combination_mean": combo_mu, "combination_sd": sd,
                "aptitude_gap": spec.aptitude_gap, "prepared_fraction": spec.prepared_fraction,
                "realized_prepared_fraction": float(prepared.mean()),
                "expected_bayes_accuracy": expected_bayes},
    )
    return ds, truth


def table1_suite(master_seed: int = 42, signal_strength: float = DEFAULT_SIGNAL_STRENGTH,
                 positive_rate: float = DEFAULT_POSITIVE_RATE, **overrides):
    """One cohort per state with the published instance counts."""
    out = []
    for state, n in TABLE1:
        spec = CohortSpec(state, n, signal_strength=signal_strength, positive_rate=positive_rate,
                          seed=derive(master_seed, state) & 0x7FFFFFFFFFFFFFFF, **overrides)
        out.append(generate_cohort(spec))
    return out


def slug(state: str) -> str:
    return state.lower().replace(" ", "_")


def write_cohort(ds: Dataset, truth: GeneratorTruth, directory: str) -> str:
    from .data import write_csv

    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{slug(ds.name)}.csv")
    write_csv(ds, path)
    with open(os.path.join(directory, f"{slug(ds.name)}.truth.json"), "w") as fh:
        json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
