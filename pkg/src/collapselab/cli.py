"""Command-line front end.

::

    collapselab run <scenario> [--config FILE] [--out DIR] [--seed U64] [--key value ...]
    collapselab validate --config FILE
    collapselab default-config

Exit codes: 0 success, 1 unknown scenario, 2 configuration error,
3 invariant violation during the run. ``COLLAPSELAB_OUT`` sets the default
output directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import SCENARIOS, ConfigError, default_config_text, read_config, resolve, validate_config
from .csvio import read_report
from .fokker_planck import StabilityError
from .model import InvariantViolation

log = logging.getLogger("collapselab")

EXIT_UNKNOWN_SCENARIO = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

OUT_ENV = "COLLAPSELAB_OUT"


def _pairs(extra):
    """Turn ``['--runs', '10', '--fast=false']`` into ``{'runs': '10', 'fast': 'false'}``."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise ConfigError([f"unexpected argument {tok!r}; overrides look like --key value"])
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError([f"--{key}: missing value"])
            val = extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = val
    return out


def _parser():
    p = argparse.ArgumentParser(prog="collapselab", description="Brownian reduction laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("scenario", help=", ".join(SCENARIOS))
    r.add_argument("--config", help="key = value configuration file")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    r.add_argument("--seed", help="master seed, unsigned 64-bit")
    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("--config", required=True)
    sub.add_parser("default-config", help="print a configuration with every default")
    return p


def cmd_run(args, extra):
    if args.scenario not in SCENARIOS:
        print(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}", file=sys.stderr)
        return EXIT_UNKNOWN_SCENARIO
    from . import scenarios
    from .config import check_values

    try:
        sections = read_config(args.config) if args.config else None
        overrides = _pairs(extra)
        if args.seed is not None:
            overrides["seed"] = args.seed
        values = resolve(args.scenario, sections, overrides, source=args.config or "<config>")
        problems = check_values(args.scenario, values)
        if problems:
            raise ConfigError(problems)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out or os.environ.get(OUT_ENV) or "results"
    log.info("running %s into %s", args.scenario, out)
    try:
        _, files = scenarios.run(args.scenario, values, out)
    except StabilityError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    items, tables = read_report(files["summary"])
    for k, val in items.items():
        print(f"{k} = {val}")
    for name, rows in tables.items():
        print(f"[{name}]")
        for row in rows:
            print(",".join(row))
    return 0


def cmd_validate(args):
    try:
        diags = validate_config(args.config)
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for d in diags:
        print(d)
    return EXIT_CONFIG if diags else 0


def main(argv=None):
    args, extra = _parser().parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args, extra)
    if extra:
        print(f"unexpected arguments: {' '.join(extra)}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        return cmd_validate(args)
    print(default_config_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
