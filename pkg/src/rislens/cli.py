"""Command line entry point: ``rislens peb|rmse|snr-map --config FILE``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness import EXPERIMENTS, RunConfig, load_config, run_experiment, with_overrides

DEFAULT_OUTPUT = {"peb": "peb.csv", "rmse": "rmse.csv", "snr-map": "snr_map.csv"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rislens", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=Path, help="CSV output path ('-' for stdout)")
    parser.add_argument("--workers", type=int, help="worker threads for trials")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = load_config(args.config) if args.config else RunConfig()
    config = with_overrides(config, seed=args.seed, workers=args.workers)
    text = run_experiment(args.experiment, config)
    out = args.out or Path(config.output or DEFAULT_OUTPUT[args.experiment])
    if str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
        logging.getLogger("rislens").info("wrote %s", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
