import argparse
import logging

import config
from data.sample_matrices import ENSEMBLES, write_sample
from services.errors import InvalidDimension

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction):
    parser = subparsers.add_parser("sample", help="Write a random matrix document")
    parser.add_argument("--dim", type=int, required=True)
    parser.add_argument("--ensemble", choices=ENSEMBLES, required=True)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--out", required=True)
    parser.set_defaults(handler=handle_sample)


def handle_sample(args: argparse.Namespace) -> int:
    try:
        write_sample(args.dim, args.ensemble, args.seed, args.out)
    except InvalidDimension as e:
        logger.error(str(e))
        return config.EXIT_SCHEMA_ERROR
    return config.EXIT_OK
