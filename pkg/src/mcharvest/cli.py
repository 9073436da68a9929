"""Command line: ``mcharvest EXPERIMENT [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .errors import ConfigError, McHarvestError
from .experiments import CSV_COLUMNS, EXPERIMENTS, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    epilog = "outputs per experiment:\n" + "\n".join(f"  {k:14s} {v}" for k, v in CSV_COLUMNS.items())
    ap = argparse.ArgumentParser(
        prog="mcharvest",
        description="Molecule-harvesting transmitter: channel, NFM, BER and particle simulation.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value (repeatable)")
    ap.add_argument("--seed", type=int, help="PBS seed")
    ap.add_argument("--realizations", type=int, help="PBS realizations")
    ap.add_argument("--dt-s", type=float, help="PBS time step in seconds")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary printout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    overrides = list(args.set)
    for flag, key in ((args.seed, "pbs.seed"), (args.realizations, "pbs.realizations"), (args.dt_s, "pbs.dt_s")):
        if flag is not None:
            overrides.append(f"{key}={flag}")
    try:
        cfg = load_config(args.config, overrides)
        res = run_experiment(args.experiment, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (McHarvestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(json.dumps(res.summary, indent=2, default=float))
    if not res.ok:
        print(f"{args.experiment}: validation failed", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
