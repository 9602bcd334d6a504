"""Command-line entry point: ``isomatch {estimate,bootstrap,simulate,oracle}``.

Exit codes: 0 on success, 1 on an estimation error (a JSON error object is
written to stdout), 2 on a usage error (message on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from typing import Optional, Sequence

from .baselines import estimate_param_ate
from .bootstrap import bootstrap_distribution
from .errors import IsomatchError
from .matching import DEFAULT_SEED, AteReport, EstimateOptions, estimate_ate_univariate
from .sample import Sample, load_csv
from .simulation import DESIGNS, ESTIMATORS, oracle_report, run_monte_carlo
from .single_index import estimate_ate_multivariate


class UsageError(Exception):
    pass


def _level(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"level must lie in (0, 1), got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _columns(text: str) -> list[str]:
    cols = [c.strip() for c in text.split(",") if c.strip()]
    if not cols:
        raise argparse.ArgumentTypeError("at least one covariate column is required")
    return cols


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--outcome", required=True)
    p.add_argument("--treatment", required=True)
    p.add_argument("--covariates", required=True, type=_columns, help="comma-separated column names")
    p.add_argument("--estimator", choices=ESTIMATORS, default=None,
                   help="default: uc-isotonic for one covariate, uc-iso-index otherwise")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--level", type=_level, default=0.95)
    p.add_argument("--merge-degenerate", action="store_true",
                   help="merge all-treated or all-control blocks into their inward neighbour")
    p.add_argument("--format", choices=("json", "table"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isomatch", description="Isotonic propensity score matching estimates of the ATE."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="point estimate with an optional bootstrap interval")
    _add_data_args(est)
    est.add_argument("--bootstrap", type=_non_negative, default=0, metavar="B",
                     help="number of bootstrap replicates (0 disables)")

    boot = sub.add_parser("bootstrap", help="bootstrap distribution summary")
    _add_data_args(boot)
    boot.add_argument("--B", type=_positive, required=True, dest="B")

    sim = sub.add_parser("simulate", help="Monte Carlo run on a built-in design")
    sim.add_argument("--design", choices=DESIGNS, required=True)
    sim.add_argument("--n", type=_positive, required=True)
    sim.add_argument("--reps", type=_positive, required=True)
    sim.add_argument("--estimator", choices=ESTIMATORS, action="append", required=True,
                     help="repeat to compare estimators on shared seeds")
    sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sim.add_argument("--merge-degenerate", action="store_true")
    sim.add_argument("--format", choices=("json", "table"), default="json")

    orc = sub.add_parser("oracle", help="closed-form efficiency bound")
    orc.add_argument("--design", choices=DESIGNS, required=True)
    orc.add_argument("--format", choices=("json", "table"), default="json")
    return parser


def _load(args) -> Sample:
    if not os.path.isfile(args.input):
        raise UsageError(f"input file not found: {args.input}")
    return load_csv(args.input, args.outcome, args.treatment, args.covariates)


def _estimator(args, sample: Sample) -> str:
    if args.estimator is not None:
        return args.estimator
    return "uc-isotonic" if sample.k == 1 else "uc-iso-index"


def _options(args, bootstrap: int = 0) -> EstimateOptions:
    return EstimateOptions(
        merge_degenerate=args.merge_degenerate,
        bootstrap=bootstrap,
        seed=args.seed,
        level=args.level,
    )


def _estimate(args) -> dict:
    sample = _load(args)
    estimator = _estimator(args, sample)
    if estimator in ("logit-m1", "probit-m1"):
        if args.bootstrap:
            raise UsageError(f"--bootstrap is not available for {estimator}")
        tau, _ = estimate_param_ate(sample, estimator.split("-")[0])
        report = AteReport(estimator, sample.n, sample.k, tau, None, None, None, seed=args.seed)
        return report.to_dict()
    options = _options(args, args.bootstrap)
    if estimator == "uc-isotonic":
        report = estimate_ate_univariate(sample, options)
    else:
        report = estimate_ate_multivariate(sample, options)
    return report.to_dict()


def _bootstrap(args) -> dict:
    sample = _load(args)
    estimator = _estimator(args, sample)
    if estimator in ("logit-m1", "probit-m1"):
        raise UsageError(f"bootstrap is not available for {estimator}")
    method = "univariate" if estimator == "uc-isotonic" else "single-index"
    summary = bootstrap_distribution(
        sample, args.B, args.seed, method=method, level=args.level, options=_options(args)
    )
    out = summary.to_dict()
    out["method"] = method
    out["seed"] = args.seed
    out["warnings"] = list(summary.warnings)
    return out


def _simulate(args):
    options = EstimateOptions(merge_degenerate=args.merge_degenerate, seed=args.seed)
    reports = [
        run_monte_carlo(args.design, est, args.n, args.reps, args.seed, options).to_dict()
        for est in args.estimator
    ]
    return reports[0] if len(reports) == 1 else reports


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def simulation_table(reports: list[dict]) -> str:
    cols = ("estimator", "design", "n", "reps", "mc_mean", "mc_bias", "n_times_mse", "failures")
    rows = [[_fmt(r[c]) for c in cols] for r in reports]
    widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def key_value_table(doc: dict) -> str:
    width = max(len(k) for k in doc)
    lines = []
    for key, value in doc.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value)
        lines.append(f"{key.ljust(width)}  {_fmt(value)}")
    return "\n".join(lines)


def render(result, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result, indent=2, allow_nan=False)
    if isinstance(result, list) or "mc_mean" in result:
        return simulation_table(result if isinstance(result, list) else [result])
    return key_value_table(result)


COMMANDS = {
    "estimate": _estimate,
    "bootstrap": _bootstrap,
    "simulate": _simulate,
    "oracle": lambda args: oracle_report(args.design),
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            # conditions worth reporting are carried in the report's warnings
            warnings.simplefilter("ignore", RuntimeWarning)
            result = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"isomatch: error: {exc}", file=sys.stderr)
        return 2
    except IsomatchError as exc:
        print(json.dumps(exc.to_dict(), indent=2))
        return 1
    print(render(result, args.format))
    return 0


def main() -> None:
    sys.exit(run_cli())
