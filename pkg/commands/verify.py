import argparse
import logging
from typing import List

import config
from services.report_service import ReportService
from services.verify_service import run_verify

logger = logging.getLogger(__name__)


def parse_dims(text: str) -> List[int]:
    """Accept ``2..8`` or ``2,3,5``."""
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            dims = list(range(low, high + 1))
        else:
            dims = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dimension list {text!r}")
    if not dims or min(dims) < 2:
        raise argparse.ArgumentTypeError("dimensions must be integers >= 2")
    return dims


def register(subparsers: argparse._SubParsersAction):
    parser = subparsers.add_parser("verify", help="Run the randomized property suite")
    parser.add_argument("--seed", type=int, default=config.VERIFY_SEED)
    parser.add_argument("--dims", type=parse_dims, default=list(config.VERIFY_DIMS), help="e.g. 2..8 or 2,4,6")
    parser.add_argument("--samples", type=int, default=config.VERIFY_SAMPLES)
    parser.add_argument("--tolerance", type=float, default=config.VERIFY_TOLERANCE,
                        help="Multiplier on every property threshold")
    parser.add_argument("--out", default=None, help="Output path (stdout when omitted)")
    parser.set_defaults(handler=handle_verify)


def handle_verify(args: argparse.Namespace) -> int:
    try:
        report = run_verify(args.seed, args.dims, args.samples, args.tolerance)
    except ValueError as e:
        logger.error(f"Invalid verify arguments: {e}")
        return config.EXIT_SCHEMA_ERROR
    ReportService().write(report, args.out)
    return config.EXIT_OK if report.passed else config.EXIT_SUITE_FAILURE
