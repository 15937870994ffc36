"""Run the experiment over a set of cohorts and write its reports.

Layout under the output directory::

    <state>/report.json   cross-validation report (pooled and per-fold)
    <state>/report.csv    the state's results row
    <state>/rules.md      rules from the model trained on the whole cohort
    <state>/truth.json    generator ground truth (synthetic runs only)
    results.csv           one row per state
    stats.txt             one-sample t-tests over results.csv
    run_meta.json         timestamps, timings and version

Everything except ``run_meta.json`` is a pure function of the configuration,
so repeated runs produce identical bytes whether or not states run in
parallel.  ``stats.txt`` is computed from the rounded values in
``results.csv`` and can be regenerated from that file alone.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import __version__
from .config import RunConfig
from .data import Dataset, load_csv
from .ensemble import PipelineConfig, train_upm
from .evaluate import CSV_COLUMNS, EvalReport, cross_validate, format_row
from .preprocess import apply_transform
from .rules import RuleSet, format_rules, rules_for_model
from .stats import COLUMN_LABELS, format_t_test, one_sample_t, t_test_csv
from .synthgen import slug, table1_suite

# (results column, test value) for the three published hypotheses
SUITE_TESTS = (("accuracy_pct", 90.0), ("f1_weighted_pct", 90.0), ("kappa", 0.8))
PARTIAL = ".partial"


class SuiteFailure(RuntimeError):
    """A dataset failed; ``cause`` keeps the original exception for exit-code mapping."""

    def __init__(self, dataset: str, cause: BaseException):
        super().__init__(f"{dataset}: {cause}")
        self.dataset = dataset
        self.cause = cause


@dataclass
class StateResult:
    report: EvalReport
    rules: RuleSet
    truth: dict | None = None
    seconds: float = 0.0


@dataclass
class SuiteReport:
    states: list[StateResult]
    rows: list[dict]            # results.csv rows as read back (rounded)
    tests: dict                 # column -> TTestResult
    files: list[str] = field(default_factory=list)

    @property
    def means(self) -> dict:
        return {c: sum(r[c] for r in self.rows) / len(self.rows) for c in CSV_COLUMNS[1:]}


def results_csv(reports: list[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(format_row(r.row()))
    return buf.getvalue()


def parse_results(text: str) -> list[dict]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append({"state": rec["state"], **{c: float(rec[c]) for c in CSV_COLUMNS[1:]}})
    return rows


def suite_tests(rows: list[dict]) -> dict:
    return {col: one_sample_t([r[col] for r in rows], mu0) for col, mu0 in SUITE_TESTS}


def stats_text(rows: list[dict], tests: dict) -> str:
    n = len(rows)
    means = {c: sum(r[c] for r in rows) / n for c in CSV_COLUMNS[1:]}
    head = [f"States: {n}",
            f"Mean accuracy (%): {means['accuracy_pct']:.3f}",
            f"Mean weighted F1 (%): {means['f1_weighted_pct']:.3f}",
            f"Mean kappa: {means['kappa']:.4f}", ""]
    blocks = [format_t_test(tests[col], COLUMN_LABELS[col]) for col, _ in SUITE_TESTS]
    return "\n".join(head) + "\n" + "\n".join(blocks)


def stats_csv(tests: dict) -> str:
    return t_test_csv([(COLUMN_LABELS[col], tests[col]) for col, _ in SUITE_TESTS])


def evaluate_state(ds: Dataset, cfg: PipelineConfig, member: str = "cart", workers: int = 1):
    """Cross-validate one cohort, then train on all of it and read off rules."""
    start = time.perf_counter()
    report = cross_validate(ds, cfg, workers=workers)
    model = train_upm(ds, cfg)
    rules = rules_for_model(model, apply_transform(model.transform, ds), member)[0]
    return report, rules, time.perf_counter() - start


def _evaluate_state_star(args):
    return evaluate_state(*args)


def load_inputs(cfg: RunConfig) -> list[tuple[Dataset, dict | None]]:
    if cfg.synthetic:
        return [(ds, truth.to_dict()) for ds, truth in table1_suite(cfg.seed, **cfg.synth_params())]
    return [(load_csv(p, cfg.label_column), None) for p in cfg.inputs]


def _write(path: str, text: str, written: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    written.append(path)


def _mark_partial(paths: list[str]) -> list[str]:
    out = []
    for p in paths:
        if os.path.exists(p):
            os.replace(p, p + PARTIAL)
            out.append(p + PARTIAL)
    return out


def _clear_partials(root: str) -> None:
    for dirpath, _, names in os.walk(root):
        for n in names:
            if n.endswith(PARTIAL):
                os.remove(os.path.join(dirpath, n))


def run_suite(cfg: RunConfig, datasets: list[tuple[Dataset, dict | None]] | None = None,
              log=None) -> SuiteReport:
    """Evaluate every cohort and write the reports under ``cfg.out``.

    States run in a process pool when ``cfg.workers > 1``; files are written
    by this process only, in input order.  If a state fails, every file
    written so far is renamed with a ``.partial`` suffix and
    :class:`SuiteFailure` is raised naming the state.
    """
    started = datetime.now(timezone.utc)
    if datasets is None:
        datasets = load_inputs(cfg)
    if not datasets:
        raise SuiteFailure("suite", ValueError("no datasets: give input files or use the synthetic suite"))
    names = [ds.name for ds, _ in datasets]
    if len({slug(n) for n in names}) != len(names):
        raise SuiteFailure("suite", ValueError(f"dataset names must be distinct, got {names}"))
    pipe = cfg.pipeline()
    os.makedirs(cfg.out, exist_ok=True)
    _clear_partials(cfg.out)
    written: list[str] = []
    states: list[StateResult] = []
    jobs = [(ds, pipe, cfg.rule_member) for ds, _ in datasets]

    def outcomes():
        if cfg.workers > 1 and len(jobs) > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(_evaluate_state_star, j) for j in jobs]
                for f in futures:
                    yield f.result
        else:
            for j in jobs:
                yield lambda j=j: _evaluate_state_star(j)

    try:
        for (ds, truth), get in zip(datasets, outcomes()):
            try:
                report, rules, seconds = get()
            except Exception as exc:
                raise SuiteFailure(ds.name, exc) from exc
            d = os.path.join(cfg.out, slug(ds.name))
            os.makedirs(d, exist_ok=True)
            _write(os.path.join(d, "report.json"), report.to_json(), written)
            _write(os.path.join(d, "report.csv"), report.to_csv(), written)
            _write(os.path.join(d, "rules.md"), format_rules(rules, cfg.rule_style), written)
            if truth is not None:
                _write(os.path.join(d, "truth.json"), json.dumps(truth, indent=2, sort_keys=True) + "\n", written)
            states.append(StateResult(report, rules, truth, seconds))
            if log:
                log(f"{ds.name:<16} n={ds.n:<5} acc={report.accuracy_pct:7.3f}  "
                    f"f1={report.f1_weighted_pct:7.3f}  kappa={report.kappa:.4f}  ({seconds:.1f}s)")
        text = results_csv([s.report for s in states])
        _write(os.path.join(cfg.out, "results.csv"), text, written)
        rows = parse_results(text)
        tests = suite_tests(rows) if len(rows) >= 2 else {}
        if tests:
            _write(os.path.join(cfg.out, "stats.txt"), stats_text(rows, tests), written)
            _write(os.path.join(cfg.out, "stats.csv"), stats_csv(tests), written)
    except SuiteFailure:
        if states:
            _write(os.path.join(cfg.out, "results.csv"), results_csv([s.report for s in states]), written)
        _mark_partial(written)
        raise
    except BaseException:
        _mark_partial(written)
        raise
    meta = {
        "version": __version__,
        "started": started.isoformat(timespec="seconds"),
        "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seconds": {s.report.dataset: round(s.seconds, 3) for s in states},
        "config": cfg.to_dict(),
    }
    _write(os.path.join(cfg.out, "run_meta.json"), json.dumps(meta, indent=2, sort_keys=True) + "\n", written)
    return SuiteReport(states, rows, tests, written)

