"""``upm`` command line: generate cohorts, run the pipeline, report.

Exit codes: 0 success, 2 configuration or usage error, 3 data error,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import RULE_STYLES, ConfigError, RunConfig, parse_rule, load_config
from .data import DataError, load_csv, write_csv
from .ensemble import MEMBERS, save_model, train_upm
from .evaluate import cross_validate
from .learners import LearnerError
from .preprocess import apply_transform, fit_preprocessing
from .rules import format_rules, rules_for_model
from .seeds import derive
from .stats import COLUMN_LABELS, StatsError, format_t_test, one_sample_t, read_column, t_test_csv
from .synthgen import TABLE1, CohortSpec, GeneratorError, generate_cohort, slug, write_cohort

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_MU = {"accuracy_pct": 90.0, "f1_weighted_pct": 90.0, "kappa": 0.8}


def _common(p: argparse.ArgumentParser, out_help: str = "output directory", generates: bool = False) -> None:
    g = p.add_argument_group("run settings (override --config)")
    g.add_argument("--config", metavar="FILE", help="flat 'key = value' settings file")
    if generates:
        g.add_argument("--seed", type=int, help="master seed of the synthetic cohorts (default 42)")
        g.add_argument("--pipeline-seed", type=int, help="seed of fold plans and training (default 1)")
    else:
        g.add_argument("--seed", type=int, dest="pipeline_seed",
                       help="seed of fold plans and training (default 1)")
    g.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    g.add_argument("--rule", type=parse_rule, metavar="{avg,majority}",
                   help="how member votes combine: average the probabilities or count votes")
    g.add_argument("--global-prep", action="store_true", default=None,
                   help="fit preprocessing once on the whole dataset instead of inside each fold")
    g.add_argument("--out", metavar="DIR", help=out_help)
    g.add_argument("--workers", type=int, help="parallel processes (results do not depend on it)")
    g.add_argument("--label-column", help="name of the Placed/Unplaced column (default placement_status)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="upm", description="Placement prediction pipeline: generate cohorts, evaluate, extract rules, test.",
        epilog="exit codes: 0 success, 2 configuration or usage error, 3 data error, 4 numeric failure")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("gen", help="write synthetic state cohorts as CSV plus truth.json")
    _common(p, "directory for the CSVs (default: the run directory)", generates=True)
    p.add_argument("--state", action="append", metavar="NAME",
                   help="only this state (repeatable); default all seventeen")
    p.add_argument("--signal-strength", type=float, help="label signal strength (beta)")
    p.add_argument("--positive-rate", type=float, help="fraction labelled Placed")

    p = sub.add_parser("prep", help="fit preprocessing and write the reduced dataset")
    p.add_argument("data", help="cohort CSV")
    _common(p)

    p = sub.add_parser("train", help="train the ensemble on a whole cohort and save it as JSON")
    p.add_argument("data", help="cohort CSV")
    p.add_argument("--model", metavar="FILE", help="model path (default <out>/<state>.model.json)")
    _common(p)

    p = sub.add_parser("eval", help="cross-validate the pipeline (or one member) on a cohort")
    p.add_argument("data", help="cohort CSV")
    p.add_argument("--learner", choices=("upm",) + MEMBERS, default="upm")
    _common(p, "also write report.json and report.csv here")

    p = sub.add_parser("rules", help="print IF-THEN rules from a tree trained on a cohort")
    p.add_argument("data", help="cohort CSV")
    p.add_argument("--member", choices=("cart", "rtree"), default="cart")
    p.add_argument("--format", choices=RULE_STYLES, default="text")
    _common(p)

    p = sub.add_parser("stats", help="one-sample t-test over a column of results.csv")
    p.add_argument("results", help="CSV with a header row")
    p.add_argument("--column", action="append",
                   help="column to test (repeatable; default accuracy_pct, f1_weighted_pct and kappa)")
    p.add_argument("--mu", type=float, action="append",
                   help="test value, one per --column (defaults 90, 90 and 0.8)")
    p.add_argument("--format", choices=("text", "csv"), default="text")

    p = sub.add_parser("suite", help="cross-validate every cohort and write results.csv and stats.txt")
    p.add_argument("inputs", nargs="*", help="cohort CSVs (omit with --synthetic)")
    p.add_argument("--synthetic", action="store_true", default=None,
                   help="generate the seventeen synthetic state cohorts from --seed")
    _common(p, generates=True)
    p.add_argument("--quiet", action="store_true", help="no per-state progress lines")

    sub.add_parser("version", help="print the version")
    return parser


def _run_config(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in
                 ("seed", "pipeline_seed", "folds", "rule", "global_prep", "out", "workers", "label_column", "synthetic")}
    if getattr(args, "signal_strength", None) is not None:
        overrides["signal_strength"] = args.signal_strength
    if getattr(args, "positive_rate", None) is not None:
        overrides["positive_rate"] = args.positive_rate
    if getattr(args, "inputs", None):
        overrides["inputs"] = tuple(args.inputs)
    return load_config(args.config, **overrides)


def _load(args, cfg: RunConfig):
    return load_csv(args.data, cfg.label_column)


def cmd_gen(args, cfg: RunConfig, out) -> int:
    wanted = {slug(s) for s in args.state or ()}
    known = {slug(s) for s, _ in TABLE1}
    if wanted - known:
        raise ConfigError(f"unknown state(s) {sorted(wanted - known)}; known: {sorted(known)}")
    for state, n in TABLE1:
        if wanted and slug(state) not in wanted:
            continue
        spec = CohortSpec(state, n, seed=derive(cfg.seed, state) & 0x7FFFFFFFFFFFFFFF, **cfg.synth_params())
        ds, truth = generate_cohort(spec)
        path = write_cohort(ds, truth, cfg.out)
        print(f"{path}  n={ds.n}  bayes={truth.realized_bayes_accuracy:.2f}", file=out)
    return EXIT_OK


def cmd_prep(args, cfg: RunConfig, out) -> int:
    ds = _load(args, cfg)
    pipe = cfg.pipeline()
    reduced, transform, acs = fit_preprocessing(ds, pipe.prep, derive(pipe.seed, "prep") & 0x7FFFFFFF)
    os.makedirs(cfg.out, exist_ok=True)
    base = os.path.join(cfg.out, slug(ds.name))
    write_csv(reduced, base + ".reduced.csv", cfg.label_column)
    with open(base + ".transform.json", "w") as fh:
        json.dump(transform.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{ds.n_attributes} attributes -> {reduced.n_attributes} "
          f"(k={acs.k_used} attribute clusters, silhouette {acs.silhouette:.3f})", file=out)
    print("kept: " + ", ".join(reduced.attribute_names), file=out)
    print(f"wrote {base}.reduced.csv and {base}.transform.json", file=out)
    return EXIT_OK


def cmd_train(args, cfg: RunConfig, out) -> int:
    ds = _load(args, cfg)
    model = train_upm(ds, cfg.pipeline())
    path = args.model or os.path.join(cfg.out, f"{slug(ds.name)}.model.json")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    save_model(model, path)
    print(f"trained on {ds.n} instances, {len(model.selected)} attributes selected; saved {path}", file=out)
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig, out) -> int:
    ds = _load(args, cfg)
    report = cross_validate(ds, cfg.pipeline(), learner=args.learner, workers=cfg.workers)
    out.write(report.to_csv())
    if getattr(args, "out", None):
        os.makedirs(cfg.out, exist_ok=True)
        for name, text in (("report.json", report.to_json()), ("report.csv", report.to_csv())):
            with open(os.path.join(cfg.out, name), "w") as fh:
                fh.write(text)
    return EXIT_OK


def cmd_rules(args, cfg: RunConfig, out) -> int:
    ds = _load(args, cfg)
    model = train_upm(ds, cfg.pipeline())
    rs = rules_for_model(model, apply_transform(model.transform, ds), args.member)[0]
    out.write(format_rules(rs, args.format))
    return EXIT_OK


def cmd_stats(args, out) -> int:
    columns = args.column or list(DEFAULT_MU)
    mus = args.mu or []
    if mus and len(mus) != len(columns):
        raise ConfigError("give one --mu per --column")
    if not mus:
        unknown = [c for c in columns if c not in DEFAULT_MU]
        if unknown:
            raise ConfigError(f"no default test value for {unknown}; pass --mu")
        mus = [DEFAULT_MU[c] for c in columns]
    results = []
    for col, mu in zip(columns, mus):
        results.append((COLUMN_LABELS.get(col, col), one_sample_t(read_column(args.results, col), mu)))
    if args.format == "csv":
        out.write(t_test_csv(results))
    else:
        out.write("\n".join(format_t_test(r, label) for label, r in results))
    return EXIT_OK


def cmd_suite(args, cfg: RunConfig, out) -> int:
    from .report import run_suite

    if not cfg.synthetic and not cfg.inputs:
        raise ConfigError("suite needs cohort CSVs or --synthetic")
    log = None if args.quiet else (lambda line: print(line, file=out, flush=True))
    report = run_suite(cfg, log=log)
    m = report.means
    print(f"mean accuracy {m['accuracy_pct']:.3f}  F1 {m['f1_weighted_pct']:.3f}  kappa {m['kappa']:.4f}; "
          f"reports in {cfg.out}", file=out)
    return EXIT_OK


def _exit_code(exc: BaseException) -> int:
    from .report import SuiteFailure

    if isinstance(exc, SuiteFailure):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (ArithmeticError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, GeneratorError, LearnerError, StatsError, OSError, ValueError)):
        return EXIT_DATA
    return EXIT_NUMERIC


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(f"upm {__version__}", file=out)
        return EXIT_OK
    try:
        if args.command == "stats":
            return cmd_stats(args, out)
        cfg = _run_config(args)
        handler = {"gen": cmd_gen, "prep": cmd_prep, "train": cmd_train, "eval": cmd_eval,
                   "rules": cmd_rules, "suite": cmd_suite}[args.command]
        return handler(args, cfg, out)
    except Exception as exc:
        code = _exit_code(exc)
        print(f"upm {args.command}: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
