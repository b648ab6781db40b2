"""Command-line interface: ``test``, ``threshold``, ``simulate`` and ``report``.

Exit status is 0 when the computation finished (rejections included), 2 for
usage or input errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import limits
from .data import DataError, load_matrix
from .empirical import (
    COVARIANCE,
    KINDS,
    EmpiricalCombinedLaw,
    EmpiricalExtremeLaw,
    cached_tail,
    default_tail_size,
)
from .limits import NumericalError
from .procedures import LAWS, STATISTIC_ORDER, TestConfig, run_all
from .simulation import (
    MODEL_IDS,
    FULL_P_GRID,
    SimulationConfig,
    read_report_csv,
    report_tables,
    run_grid,
    write_report_csv,
)

log = logging.getLogger("hdindep")

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(ValueError):
    pass


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return _finite(obj)


def default_cache_dir() -> Path:
    env = os.environ.get("HDTEST_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "hdindep"


def _alpha(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a number in (0, 1), got {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _int_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 2:
        raise argparse.ArgumentTypeError(f"dimensions must be integers >= 2, got {text!r}")
    return values


def _models(text: str) -> list:
    models = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in models if m not in MODEL_IDS]
    if bad or not models:
        raise argparse.ArgumentTypeError(
            f"unknown model(s) {', '.join(bad) or text!r}; valid ids are {', '.join(MODEL_IDS)}"
        )
    return models


def _stats(text: str) -> tuple:
    if text.strip().lower() == "all":
        return STATISTIC_ORDER
    names = [s.strip().upper() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in STATISTIC_ORDER]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown statistic(s) {', '.join(bad) or text!r}; choose from {', '.join(STATISTIC_ORDER)} or all"
        )
    return tuple(s for s in STATISTIC_ORDER if s in names)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdindep",
        description="High-dimensional independence tests combining sum-of-squares and maximum statistics.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=_alpha, default=0.05)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed for all simulated laws (default 0; 42 for simulate)")
    common.add_argument("--m", type=_positive_int, default=None,
                        help="simulated null pairs per tail table (default max(1e6, 100 p^2))")
    common.add_argument("--rank-m", type=_positive_int, default=None,
                        help="simulated pairs for the Spearman tail table (default: --m)")
    common.add_argument("--normal-samples", type=_positive_int, default=10**6,
                        help="paired draws for the simulated convolution threshold")
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    t = sub.add_parser("test", parents=[common], help="test independence of the columns of a CSV matrix")
    t.add_argument("--input", required=True)
    t.add_argument("--stats", type=_stats, default=STATISTIC_ORDER, help="comma list of S,L,TS1,T,M,TS2 or all")
    t.add_argument("--extreme-law", choices=LAWS, default="empirical")
    t.add_argument("--combined-law", choices=LAWS, default="empirical")
    t.add_argument("--no-standardize", action="store_true",
                   help="treat columns as already zero-mean, unit-variance")
    t.add_argument("--m4", type=float, default=None, help="known population fourth moment")
    t.add_argument("--columns-are-observations", action="store_true")

    th = sub.add_parser("threshold", parents=[common], help="critical values for given (n, p)")
    th.add_argument("--n", type=int, required=True)
    th.add_argument("--p", type=int, required=True)
    th.add_argument("--kind", choices=KINDS, default=COVARIANCE)
    th.add_argument("--target", choices=("extreme", "combined", "both"), default="combined")
    th.add_argument("--law", choices=("analytic", "empirical", "both"), default="both")
    th.add_argument("--no-standardize", action="store_true")

    s = sub.add_parser("simulate", parents=[common], help="size/power study over the simulation models")
    s.add_argument("--models", type=_models, default=["1a"])
    s.add_argument("--p", type=_int_list, default=[50, 100, 200])
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--reps", type=_positive_int, default=500)
    s.add_argument("--stats", type=_stats, default=STATISTIC_ORDER)
    s.add_argument("--raw", action="store_true",
                   help="skip standardization; Gaussian columns taken as known N(0,1) with m4 = 3")
    s.add_argument("--full", action="store_true",
                   help="large grid: p up to 1000 and 1000 replicates")
    s.add_argument("--out", default=None, help="report CSV path (default: stdout)")

    r = sub.add_parser("report", help="render a report CSV as tables")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--format", choices=("text", "csv"), default="text")
    return parser


def _cache_dir():
    return str(default_cache_dir())


def _seed(args, default: int = 0) -> int:
    if args.seed is None:
        return default
    if args.seed < 0:
        raise UsageError(f"seed must be non-negative, got {args.seed}")
    return args.seed


def cmd_test(args) -> int:
    args.seed = _seed(args)
    try:
        X = load_matrix(args.input, rows_are_observations=not args.columns_are_observations)
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}")
    config = TestConfig(
        alpha=args.alpha,
        extreme_law=args.extreme_law,
        combined_law=args.combined_law,
        standardize=not args.no_standardize,
        m4=args.m4,
        m=args.m,
        rank_m=args.rank_m,
        normal_samples=args.normal_samples,
        seed=args.seed,
        workers=args.threads,
        cache_dir=_cache_dir(),
    )
    outcomes = run_all(X, config, statistics=args.stats)
    if args.json:
        payload = {
            "schema": SCHEMA,
            "command": "test",
            "input": str(args.input),
            "n": X.n,
            "p": X.p,
            "alpha": args.alpha,
            "standardized": config.standardize,
            "seed": args.seed,
            "outcomes": [o.to_dict() for o in outcomes],
        }
        print(json.dumps(_clean(payload), indent=2))
        return EXIT_OK
    print(f"n={X.n} p={X.p} alpha={args.alpha} standardized={config.standardize}")
    header = ("statistic", "raw", "normalized", "threshold", "p_value", "reject", "law")
    rows = [
        (o.statistic, f"{o.raw:.6g}", f"{o.normalized:.4f}", f"{o.threshold:.4f}",
         f"{o.p_value:.4g}", "yes" if o.reject else "no", o.law)
        for o in outcomes
    ]
    widths = [max(len(r[k]) for r in [header, *rows]) for k in range(len(header))]
    for row in [header, *rows]:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return EXIT_OK


def cmd_threshold(args) -> int:
    args.seed = _seed(args)
    if args.n < 4 or args.p < 2:
        raise UsageError(f"need n >= 4 and p >= 2, got n={args.n}, p={args.p}")
    targets = ("extreme", "combined") if args.target == "both" else (args.target,)
    laws = ("analytic", "empirical") if args.law == "both" else (args.law,)
    results = []
    cache_status = None
    tail = None
    for law in laws:
        if law == "empirical" and tail is None:
            m = args.rank_m if args.kind == "spearman" and args.rank_m is not None else args.m
            if m is None:
                m = default_tail_size(args.p)
            tail, cache_status = cached_tail(
                args.n, args.p, m, args.kind, args.seed,
                standardized=not args.no_standardize,
                cache_dir=_cache_dir(),
                workers=args.threads,
            )
        for target in targets:
            if law == "analytic":
                value = (limits.intermediate_upper_quantile(args.alpha, args.p) if target == "extreme"
                         else limits.convolution_upper_quantile(args.alpha, args.p))
            elif target == "extreme":
                value = EmpiricalExtremeLaw(tail).threshold(args.alpha)
            else:
                value = EmpiricalCombinedLaw(tail, args.normal_samples, args.seed).threshold(args.alpha)
            results.append({"target": target, "law": law, "threshold": value})
    if args.json:
        payload = {
            "schema": SCHEMA,
            "command": "threshold",
            "n": args.n,
            "p": args.p,
            "alpha": args.alpha,
            "kind": args.kind,
            "seed": args.seed,
            "m": tail.m if tail is not None else None,
            "dkw_epsilon": tail.dkw_epsilon if tail is not None else None,
            "cache": cache_status,
            "thresholds": results,
        }
        print(json.dumps(_clean(payload), indent=2))
    elif len(results) == 1:
        print(f"{results[0]['threshold']:.10g}")
    else:
        for r in results:
            print(f"{r['target']:<9} {r['law']:<10} {r['threshold']:.10g}")
    if cache_status is not None:
        log.info("tail cache: %s", cache_status)
    return EXIT_OK


def cmd_simulate(args) -> int:
    args.seed = _seed(args, 42)
    p_grid = list(FULL_P_GRID) if args.full else args.p
    reps = 1000 if args.full else args.reps
    config = SimulationConfig(
        n=args.n,
        alpha=args.alpha,
        reps=reps,
        seed=args.seed,
        m=args.m,
        rank_m=args.rank_m,
        normal_samples=args.normal_samples,
        standardize=not args.raw,
        m4=None if not args.raw else 3.0,
        workers=args.threads,
        cache_dir=_cache_dir(),
    )
    start = time.perf_counter()
    report = run_grid(args.models, p_grid, args.stats, config)
    log.info("simulation finished in %.1fs", time.perf_counter() - start)
    if args.out:
        write_report_csv(report, args.out)
    if args.json:
        payload = {
            "schema": SCHEMA,
            "command": "simulate",
            "n": args.n,
            "alpha": args.alpha,
            "reps": reps,
            "seed": args.seed,
            "rows": [r.__dict__ for r in report.rows],
        }
        print(json.dumps(_clean(payload), indent=2))
    elif not args.out:
        sys.stdout.write(write_report_csv(report))
    else:
        sys.stdout.write(report_tables(report, "text"))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = read_report_csv(args.input)
    except OSError as exc:
        raise UsageError(f"cannot read report: {exc}")
    sys.stdout.write(report_tables(report, args.format))
    return EXIT_OK


COMMANDS = {"test": cmd_test, "threshold": cmd_threshold, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError, ValueError) as exc:
        print(f"hdindep {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, FloatingPointError) as exc:
        print(f"hdindep {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
