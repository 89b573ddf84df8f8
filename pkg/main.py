"""
Command-line entry point: `optimize --config <path.json> [--mode ...] [--seed ...]`.
"""

import argparse
import sys
import time

from dotenv import load_dotenv

from constants.exceptions import ShapeOptimizationError
from constants.modes import MODE_MAP, SCALES
from helpers.index import convert_seconds_to_hms
from helpers.logger_config import logger, setup_logging
from optimizer.orchestrator import WorkflowOrchestrator
from schemas.config_schemas import load_config

EXIT_OK = 0
EXIT_ABORTED = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optimize",
        description="Adaptive robust shape optimization of a cantilever under a random load angle.",
    )
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--mode", choices=sorted(MODE_MAP), help="experiment mode")
    parser.add_argument("--scale", choices=list(SCALES), help="parameter preset")
    parser.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--max-iters", type=int, dest="max_iters", help="iteration cap")
    parser.add_argument("--workers", type=int, help="threads for the per-sample solves")
    return parser


def cli_overrides(args: argparse.Namespace) -> dict:
    """Only the flags that were given, nested like the config file."""
    overrides: dict = {}
    for key in ("mode", "scale", "seed"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.out is not None:
        overrides["output"] = {"directory": args.out}
    optimization = {}
    if args.max_iters is not None:
        optimization["max_iters"] = args.max_iters
    if args.workers is not None:
        optimization["workers"] = args.workers
    if optimization:
        overrides["optimization"] = optimization
    return overrides


def main(argv: list[str] | None = None) -> int:
    load_dotenv(override=True)
    setup_logging()
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        config = load_config(args.config, cli_overrides=cli_overrides(args))
        state = WorkflowOrchestrator().start(config)
    except ShapeOptimizationError as e:
        logger.error("Run aborted", data=e.detail())
        return EXIT_ABORTED
    except Exception as e:
        logger.exception("Unexpected error, run aborted", data={"error": str(e)})
        return EXIT_ABORTED

    logger.info(
        "Run completed",
        data={
            "stop_reason": state["stop_reason"],
            "iterations": state["iteration"],
            "wall_time": convert_seconds_to_hms(time.perf_counter() - start),
        },
    )
    return EXIT_OK


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
