import argparse

from commands import compute, sample, verify


def register_commands(subparsers: argparse._SubParsersAction):
    compute.register(subparsers)
    verify.register(subparsers)
    sample.register(subparsers)
