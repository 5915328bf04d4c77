import argparse
import dataclasses
import logging
from pathlib import Path

import config
from services.compute_service import run_compute
from services.errors import INPUT_ERRORS, QcrbError
from services.report_service import ReportService
from services.spec_service import parse_orders_arg, parse_spec

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction):
    parser = subparsers.add_parser("compute", help="Evaluate moments and bounds for a problem spec")
    parser.add_argument("--spec", required=True, help="Path to the JSON problem specification")
    parser.add_argument("--out", default=None, help="Output path (stdout when omitted)")
    parser.add_argument("--orders", default=None, help="Comma-separated orders overriding the spec, e.g. 1,3,5")
    parser.add_argument("--format", choices=config.REPORT_FORMATS, default="json")
    parser.set_defaults(handler=handle_compute)


def handle_compute(args: argparse.Namespace) -> int:
    try:
        spec = parse_spec(Path(args.spec).read_bytes())
        if args.orders:
            spec = dataclasses.replace(spec, orders=parse_orders_arg(args.orders, spec.include_even_order_2))
    except OSError as e:
        logger.error(f"Cannot read spec {args.spec}: {e}")
        return config.EXIT_SCHEMA_ERROR
    except INPUT_ERRORS as e:
        logger.error(f"Invalid spec {args.spec}: {e}")
        return config.EXIT_SCHEMA_ERROR

    try:
        report = run_compute(spec)
    except INPUT_ERRORS as e:
        logger.error(f"Invalid problem: {e}")
        return config.EXIT_SCHEMA_ERROR
    except QcrbError as e:
        logger.error(f"Numerical abort at time index {e.time_index}: {e}")
        return config.EXIT_NUMERICAL_ABORT

    ReportService(spec.tolerances.report_precision).write(report, args.out, args.format)
    return config.EXIT_OK
