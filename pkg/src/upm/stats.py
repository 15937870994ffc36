"""One-sample two-tailed t-tests over per-state results.

The Student-t tail probability is evaluated through the regularized
incomplete beta function, ``p = I_x(df/2, 1/2)`` with ``x = df / (df + t^2)``,
using a modified Lentz continued fraction.  The 95% critical value is found
by bisection on that same function, so p-values and confidence intervals
always agree on which side of 0.05 they fall.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

CF_EPS = 1e-16
CF_TINY = 1e-300
CF_MAX_ITER = 10_000

COLUMN_LABELS = {"accuracy_pct": "Accuracy", "f1_weighted_pct": "F1 Score", "kappa": "Kappa"}


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class SampleSummary:
    n: int
    mean: float
    sd: float
    se: float


@dataclass(frozen=True)
class TTestResult:
    summary: SampleSummary
    test_value: float
    t: float
    df: int
    p_two_tailed: float
    mean_difference: float
    ci95: tuple[float, float]

    def to_dict(self) -> dict:
        s = self.summary
        return {"n": s.n, "mean": s.mean, "sd": s.sd, "se": s.se, "test_value": self.test_value,
                "t": self.t, "df": self.df, "p_two_tailed": self.p_two_tailed,
                "mean_difference": self.mean_difference, "ci95": list(self.ci95)}


def summarize(values) -> SampleSummary:
    xs = [float(v) for v in values]
    n = len(xs)
    if n < 2:
        raise StatsError(f"need at least 2 values, got {n}")
    if not all(math.isfinite(v) for v in xs):
        raise StatsError("values must be finite")
    mean = math.fsum(xs) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in xs) / (n - 1))
    return SampleSummary(n, mean, sd, sd / math.sqrt(n))


def _beta_cf(x: float, a: float, b: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz; converges for x < (a+1)/(a+b+2)."""
    c = 1.0
    d = 1.0 - (a + b) * x / (a + 1.0)
    d = 1.0 / (d if abs(d) > CF_TINY else CF_TINY)
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        for num in (m * (b - m) * x / ((a + m2 - 1.0) * (a + m2)),
                    -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))):
            d = 1.0 + num * d
            d = 1.0 / (d if abs(d) > CF_TINY else CF_TINY)
            c = 1.0 + num / c
            c = c if abs(c) > CF_TINY else CF_TINY
            delta = c * d
            h *= delta
        if abs(delta - 1.0) < CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def _beta_prefactor(x: float, y: float, a: float, b: float) -> float:
    # x^a y^b / (a B(a, b)) with y = 1 - x passed separately to keep precision
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    return math.exp(log_front) / a


def regularized_beta(x: float, a: float, b: float, y: float | None = None) -> float:
    """I_x(a, b).  ``y`` may carry ``1 - x`` computed without cancellation."""
    if a <= 0 or b <= 0:
        raise StatsError("beta parameters must be positive")
    y = 1.0 - x if y is None else y
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _beta_prefactor(x, y, a, b) * _beta_cf(x, a, b)
    return 1.0 - _beta_prefactor(y, x, b, a) * _beta_cf(y, b, a)


def student_t_two_tailed_p(t: float, df: int) -> float:
    if df < 1:
        raise StatsError(f"degrees of freedom must be >= 1, got {df}")
    t = float(t)
    if math.isnan(t):
        raise StatsError("t is NaN")
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    t2 = t * t
    x = df / (df + t2)
    y = t2 / (df + t2)
    return min(1.0, max(0.0, regularized_beta(x, df / 2.0, 0.5, y)))


def student_t_cdf(t: float, df: int) -> float:
    half = 0.5 * student_t_two_tailed_p(t, df)
    return 1.0 - half if t > 0 else half


def t_critical(df: int, alpha: float = 0.05, tol: float = 1e-13) -> float:
    """Two-tailed critical value: the t > 0 with p(t, df) = alpha, by bisection."""
    if not 0.0 < alpha < 1.0:
        raise StatsError("alpha must lie in (0, 1)")
    lo, hi = 0.0, 1.0
    while student_t_two_tailed_p(hi, df) > alpha:
        lo, hi = hi, hi * 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if student_t_two_tailed_p(mid, df) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def one_sample_t(values, mu0: float) -> TTestResult:
    s = summarize(values)
    if s.se == 0.0:
        raise StatsError("all values are equal; the t statistic is undefined")
    diff = s.mean - float(mu0)
    t = diff / s.se
    df = s.n - 1
    q = t_critical(df)
    return TTestResult(s, float(mu0), t, df, student_t_two_tailed_p(t, df), diff,
                       (diff - q * s.se, diff + q * s.se))


# ---------------------------------------------------------------- reports

def _spss(v: float, digits: int) -> str:
    """Fixed-point with the leading zero dropped, the way statistics packages print."""
    s = f"{v:.{digits}f}"
    if s.startswith("0."):
        return s[1:]
    if s.startswith("-0."):
        return "-" + s[2:]
    return s


def _digits(r: TTestResult) -> int:
    # enough decimals to show the spread: 3 for percentages, 7 for kappa-sized data
    scale = max(abs(r.summary.mean), r.summary.sd, 1e-12)
    return 3 if scale >= 10 else 7


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


def format_t_test(r: TTestResult, label: str) -> str:
    """The 'One-Sample Statistics' and 'One-Sample Test' tables as plain text."""
    d = _digits(r)
    s = r.summary
    stats_rows = [["", "N", "Mean", "Std. Deviation", "Std. Error Mean"],
                  [label, str(s.n), _spss(s.mean, d), _spss(s.sd, d), _spss(s.se, d)]]
    test_rows = [["", "t", "df", "Sig. (2-tailed)", "Mean Difference", "95% CI Lower", "95% CI Upper"],
                 [label, _spss(r.t, 3), str(r.df), _spss(r.p_two_tailed, 3), _spss(r.mean_difference, d),
                  _spss(r.ci95[0], d), _spss(r.ci95[1], d)]]
    tv = f"{r.test_value:g}".replace("0.", ".", 1) if abs(r.test_value) < 1 else f"{r.test_value:g}"
    return ("One-Sample Statistics\n" + _table(stats_rows) + "\n\n"
            + f"One-Sample Test (Test Value = {tv})\n"
            + _table(test_rows) + "\n")


T_TEST_CSV_COLUMNS = ("variable", "n", "mean", "sd", "se", "test_value", "t", "df", "p_two_tailed",
                      "mean_difference", "ci95_lower", "ci95_upper")


def t_test_csv(results: list[tuple[str, TTestResult]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(T_TEST_CSV_COLUMNS)
    for label, r in results:
        s = r.summary
        w.writerow([label, s.n] + [repr(float(v)) for v in (s.mean, s.sd, s.se, r.test_value, r.t)]
                   + [r.df] + [repr(float(v)) for v in (r.p_two_tailed, r.mean_difference, *r.ci95)])
    return buf.getvalue()


def read_column(path, column: str) -> list[float]:
    """Float values of one column of a results CSV, in file order."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise StatsError(f"{path}: no column {column!r} (have {reader.fieldnames})")
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                out.append(float(row[column]))
            except (TypeError, ValueError):
                raise StatsError(f"{path}: line {line}: {column}={row[column]!r} is not a number") from None
    return out
