"""Exception types shared across the package."""

from __future__ import annotations


class PlanlensError(Exception):
    """Base class for every error this package raises deliberately."""


class InputError(PlanlensError):
    """Bad user input: missing files, malformed tables, invalid configuration."""


class DegeneracyError(PlanlensError):
    """A computation reached a numerically degenerate state it cannot recover from."""


class ConsistencyError(PlanlensError):
    """An internal invariant was violated; indicates a bug or a corrupted intermediate."""
