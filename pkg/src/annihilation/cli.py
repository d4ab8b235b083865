"""Command-line entry point.

Subcommands::

    annihilation run CONFIG.json [--out DIR]
    annihilation compare A.csv B.csv --rule {abs,rel,kse} [--k K] [--tol TOL]
    annihilation schema

Exit codes: 0 every comparison passed, 1 some comparison failed, 2 bad
configuration or misaligned inputs, 3 an engine failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import AlignmentError, ConfigError, EngineError
from .runner import CONFIG_SCHEMA, CompareRule, RunConfig, Series, compare, run

log = logging.getLogger("annihilation")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ENGINE = 0, 1, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="annihilation", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides config and environment)")

    p_cmp = sub.add_parser("compare", help="compare two long-format series CSVs")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    p_cmp.add_argument("--rule", choices=["abs", "rel", "kse"], default="abs")
    p_cmp.add_argument("--k", type=float, default=3.0)
    p_cmp.add_argument("--tol", type=float, default=1e-6)

    sub.add_parser("schema", help="print the run config JSON schema")
    return parser


def _summary(report):
    failed = [r for r in report.rows if not r["pass"]]
    print(f"{len(report.rows) - len(failed)}/{len(report.rows)} comparisons passed")
    for r in failed:
        print(f"FAIL {r['observable']} t={r['t']!r} {r['engine_a']} vs {r['engine_b']}: "
              f"|{r['difference']:.3e}| > {r['tolerance']:.3e}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "schema":
        json.dump(CONFIG_SCHEMA, sys.stdout, indent=2)
        print()
        return EXIT_PASS
    try:
        if args.command == "run":
            cfg = RunConfig.load(args.config)
            report, out = run(cfg, args.out)
            log.info("wrote %s", out)
        else:
            a = Series.read_csv(args.a)
            b = Series.read_csv(args.b)
            report = compare(a, b, CompareRule(args.rule, tol=args.tol, k=args.k))
    except (ConfigError, AlignmentError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    _summary(report)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
