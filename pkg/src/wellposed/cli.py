"""Command-line front end.

Usage::

    wellposed <verb> <config> [--out DIR] [--workers N] [--format csv|jsonl]

Verbs: ``validate``, ``certify``, ``mollify-verify``, ``sweep``, ``classify``
and ``all``. ``<config>`` is a YAML path or the name of a bundled config.
Exit codes: 0 success, 1 validation failure, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .energy import IntegrationError
from .experiment import (FORMATS, ConfigError, OutputError, bundled_configs, load_config,
                         output_dir, run_experiment)
from .moduli import DomainError
from .mollify import QuadratureError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

VERB_STAGES = {
    "validate": ("validate",),
    "certify": ("validate", "certify"),
    "mollify-verify": ("validate", "mollify-verify"),
    "sweep": ("validate", "sweep"),
    "classify": ("validate", "classify"),
    "all": ("validate", "certify", "mollify-verify", "sweep", "classify"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wellposed",
        description="Energy-growth verification for wave equations with singular "
                    "time-dependent coefficients.",
        epilog="bundled configs: " + ", ".join(bundled_configs()))
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERB_STAGES:
        p = sub.add_parser(verb)
        p.add_argument("config", help="YAML config path or bundled config name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker processes for the sweep")
        p.add_argument("--format", choices=FORMATS, help="table format")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers", "must be at least 1")
        cfg = cfg.with_overrides(workers=args.workers, fmt=args.format)
        out = output_dir(cfg, args.out)
        res = run_experiment(cfg, VERB_STAGES[args.verb], out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (IntegrationError, QuadratureError, DomainError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in res.files:
        print(path)
    for msg in res.messages:
        print(msg, file=sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
