"""Sanity check tests."""

