"""Command-line entry point: ``gmudc <quenched|annealed|mp-gap|bounds>``."""

import argparse
import logging
import sys
from typing import List, Optional

from .config import config
from .exceptions import (
    BudgetViolationError,
    ConfigurationError,
    CoverageFloorError,
    EmptyReportError,
    InvalidParameterError,
    NumericalError,
    UnknownUserError,
    UnsupportedKernelError,
)
from .harness import run_annealed, run_mpgap, run_quenched
from .reporting import emit_report
from .scenario import ExperimentKind, load_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_KINDS = {
    "quenched": ExperimentKind.QUENCHED,
    "annealed": ExperimentKind.ANNEALED,
    "mp-gap": ExperimentKind.MP_GAP,
    "bounds": ExperimentKind.BOUNDS_ONLY,
}

_CONFIG_ERRORS = (
    ConfigurationError,
    InvalidParameterError,
    BudgetViolationError,
    UnsupportedKernelError,
    CoverageFloorError,
    UnknownUserError,
    EmptyReportError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmudc",
        description="Simulate budgeted multi-user distributed computing experiments",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "quenched": "train and test on one fixed topology",
        "annealed": "average over random topology draws",
        "mp-gap": "compare user Gram spectra with the Marchenko-Pastur benchmark",
        "bounds": "evaluate the bounds without training",
    }
    for name, text in helps.items():
        sub = subparsers.add_parser(name, help=text)
        sub.add_argument("--config", required=True, help="TOML scenario path")
        sub.add_argument("--seed", type=int, help="override the master seed")
        sub.add_argument("--out", default=".", help="output directory")
        sub.add_argument("--trials", type=int, help="override the trial count")
        sub.add_argument("--threads", type=int, help="worker threads")
        sub.add_argument(
            "--format",
            action="append",
            choices=["csv", "json"],
            help="report format (repeatable; default csv and json)",
        )
        sub.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.verbose:
        config.set_log_level(logging.DEBUG)
    kind = _KINDS[args.command]
    try:
        scenario = load_scenario(args.config).with_overrides(
            seed=args.seed, trials=args.trials, threads=args.threads, kind=kind
        )
        if kind is ExperimentKind.ANNEALED:
            result = run_annealed(scenario)
        elif kind is ExperimentKind.MP_GAP:
            result = run_mpgap(scenario)
        else:
            result = run_quenched(scenario)
        paths = emit_report(result, args.out, formats=args.format or ("csv", "json"))
    except NumericalError as exc:
        print(f"gmudc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as exc:
        print(f"gmudc: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
