"""Command-line entry point: ``adkit <subcommand> --config <path> [--out <dir>] [--seed <n>]``.

Exit codes: 0 on success, 2 on a configuration error, 1 on any other failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .exceptions import AdkitError, ConfigError
from .pipeline import STAGES, Pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adkit", description="Anomaly-detection benchmark pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "run"):
        help_text = "run every stage in order" if name == "run" else f"run the {name} stage"
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", help="output directory (overrides run.output)")
        p.add_argument("--seed", type=int, help="run a single seed instead of run.seeds")
        p.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.with_seeds([args.seed])
    except ConfigError as exc:
        print(f"adkit: config error: {exc}", file=sys.stderr)
        return 2
    try:
        pipeline = Pipeline(config, args.out)
        if args.command == "run":
            pipeline.run()
        else:
            pipeline.run_stage(args.command)
    except ConfigError as exc:
        print(f"adkit: config error: {exc}", file=sys.stderr)
        return 2
    except (AdkitError, OSError) as exc:
        print(f"adkit: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
