"""Semantic exception hierarchy.

Callers (and the CLI exit-code mapping) distinguish three failure modes:
invalid inputs or violated preconditions, enumeration capacity overruns,
and failed nuisance fits.
"""


class InputError(ValueError):
    """Invalid input or violated precondition."""


class CapacityError(InputError):
    """An enumeration would exceed its declared cap (never truncated silently)."""


class FittingError(RuntimeError):
    """A nuisance fit could not be carried out (e.g. an arm with no samples)."""
