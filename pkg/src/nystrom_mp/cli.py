"""``nystrom-mp`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, MatrixMarketError, NumericError
from .matrices import load_matrix_market, write_spectrum_csv
from .precision import FORMAT_NAMES, builtin_format

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nystrom-mp", description="Mixed-precision Nystrom experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("approx", "approximation errors, bounds and heuristic over a grid"),
        ("precond", "preconditioner condition numbers and PCG iterations over a grid"),
    ):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", required=True, type=Path, help="key = value experiment file")
        s.add_argument(
            "--up",
            action="append",
            choices=FORMAT_NAMES,
            help="override the config's formats (repeatable)",
        )
        s.add_argument("--out", type=Path, help=f"output directory (overrides config and ${harness.OUTPUT_ENV})")

    s = sub.add_parser("spectrum", help="write the eigenvalues of a Matrix Market matrix")
    s.add_argument("--matrix", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    return p


def _run_grid(args) -> int:
    cfg = harness.load_config(args.config)
    if args.up:
        cfg.formats = [builtin_format(f) for f in args.up]
    if args.out is not None:
        cfg.outputs = args.out
    run = harness.run_approx_experiment if args.command == "approx" else harness.run_precond_experiment
    report = run(cfg)
    rows_path, agg_path = harness.emit_csv(report, cfg.outputs)
    bad = sum(r["status"] != "ok" for r in report.rows)
    print(f"{len(report.rows)} rows ({bad} not ok) -> {rows_path}")
    print(f"{len(report.aggregates)} cells -> {agg_path}")
    return EXIT_OK


def _run_spectrum(args) -> int:
    A = load_matrix_market(args.matrix)
    write_spectrum_csv(A.spectrum(), args.out)
    print(f"n={A.n} eigenvalues -> {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "spectrum":
            return _run_spectrum(args)
        return _run_grid(args)
    except (ConfigError, MatrixMarketError, FileNotFoundError) as exc:
        print(f"nystrom-mp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"nystrom-mp: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"nystrom-mp: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
