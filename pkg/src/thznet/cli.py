"""``thznet`` command line: run experiments and compare CSVs to reference data.

Exit status: 0 success, 1 comparison failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import sys

from .config import KINDS, ConfigError, load_spec
from .experiments import (COMPARE_KEYS, SchemaError, Tolerance, compare_to_reference,
                          run_experiment)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thznet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="root RNG seed (default 1)")
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--trials", type=_positive_int, help="Monte Carlo trials (coverage)")
        p.add_argument("--parallel", type=_positive_int, help="worker processes")
        p.add_argument("--compare", action="store_true",
                       help="compare the main CSV against the packaged reference")
        p.add_argument("--abs", type=float, default=0.0, help="absolute tolerance")
        p.add_argument("--rel", type=float, default=0.0, help="relative tolerance")
        p.add_argument("--sigma", type=float, default=0.0, help="tolerance in std errors")
    c = sub.add_parser("compare", help="compare a produced CSV with a reference CSV")
    c.add_argument("produced")
    c.add_argument("reference", help="CSV path, or ref:<experiment> for packaged data")
    c.add_argument("--key", action="append", help="key column (repeatable)")
    c.add_argument("--value", help="value column")
    c.add_argument("--experiment", choices=sorted(COMPARE_KEYS),
                   help="use this experiment's key/value columns")
    c.add_argument("--abs", type=float, default=0.0)
    c.add_argument("--rel", type=float, default=0.0)
    c.add_argument("--sigma", type=float, default=0.0)
    return parser


def _report(produced, reference, keys, value, tol) -> int:
    try:
        report = compare_to_reference(produced, reference, keys, value, tol)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report.format())
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    tol = Tolerance(args.abs, args.rel, args.sigma)
    if args.command == "compare":
        if args.experiment:
            keys, value = COMPARE_KEYS[args.experiment]
            keys, value = args.key or keys, args.value or value
        elif args.key and args.value:
            keys, value = args.key, args.value
        else:
            print("error: give --experiment or both --key and --value", file=sys.stderr)
            return EXIT_CONFIG
        try:
            return _report(args.produced, args.reference, keys, value, tol)
        except (OSError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        spec = load_spec(args.config, args.command, args.seed, args.out, args.trials, args.parallel)
        result = run_experiment(spec)
    except (ConfigError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(result.summary)
    if args.compare:
        if spec.kind not in COMPARE_KEYS:
            print(f"error: no reference data for {spec.kind}", file=sys.stderr)
            return EXIT_CONFIG
        keys, value = COMPARE_KEYS[spec.kind]
        return _report(result.paths[0], f"ref:{spec.kind}", keys, value, tol)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
