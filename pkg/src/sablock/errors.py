"""Exception hierarchy shared by all sablock modules."""

from __future__ import annotations


class SablockError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SablockError):
    """Input bytes are not well-formed (bad JSON, wrong top-level shape)."""


class ValidationError(SablockError):
    """Structurally parseable data violates a model invariant.

    The message names the first offending location, e.g. ``attention[0][1][2]``.
    """


class SpecError(SablockError):
    """A synthetic-trace specification is self-contradictory or out of range."""


class ConfigError(SablockError):
    """A policy/search configuration violates its preconditions."""


class MetricError(SablockError):
    """A metric was requested on inputs it is not defined for."""
