import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

import config
from commands import register_commands

# Load environment variables
load_dotenv(dotenv_path=".env", override=False)


class TruncatingFormatter(logging.Formatter):
    """Formatter that truncates log messages to 1000 characters."""
    MAX_LENGTH = config.LOG_MAX_LENGTH

    def format(self, record):
        msg = super().format(record)
        if len(msg) > self.MAX_LENGTH:
            msg = msg[:self.MAX_LENGTH] + "... (truncated)"
        return msg


def setup_logging(level: str) -> None:
    # stderr keeps stdout free for reports
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )
    for handler in logging.root.handlers:
        handler.setFormatter(TruncatingFormatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcrb",
        description="Generalized Cramér-Rao bounds for mixed quantum states",
    )
    parser.add_argument(
        "--log-level",
        default=os.environ.get(config.LOG_LEVEL_ENV, config.DEFAULT_LOG_LEVEL),
        help=f"Logging level (default from {config.LOG_LEVEL_ENV})",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
