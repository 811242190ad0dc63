"""Error taxonomy shared across the package.

Each class marks a distinct failure family so callers can react to the
category without parsing messages.
"""

from __future__ import annotations


class ShapeError(ValueError):
    """Operand dimensions do not agree."""


class ConfigError(ValueError):
    """A configuration value is out of its documented range."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class NumericError(ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values."""


class PartitionError(ValueError):
    """A worker partition cannot be split or addressed as requested."""
