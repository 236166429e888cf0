# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Exceptions raised by l0bse.

Every concrete error also derives from the closest builtin exception so that
callers can catch either the package specific class or the builtin one.

"""

from typing import Any


class L0bseError(Exception):
    """Base class of all l0bse errors."""


class SpaceError(L0bseError, ValueError):
    """Invalid scenario tree definition (branching, probabilities, weights)."""


class PartitionError(L0bseError, ValueError):
    """Partition incompatible with a space or not a valid event partition."""


class MeasurabilityError(L0bseError, ValueError):
    """A value is not measurable w.r.t. the partition it is declared against."""


class DimensionError(L0bseError, ValueError):
    """Mismatched dimensions or mismatched underlying spaces."""


class ParameterError(L0bseError, ValueError):
    """A parameter lies outside of its domain."""


class BudgetError(ParameterError):
    """A contraction budget or admissibility condition fails on a base block.

    Parameters
    ----------
    message : str
        Human readable description.
    block : int
        Index of the first violating block of the base partition.

    """

    def __init__(self, message: str, block: int) -> None:
        super().__init__(message)
        self.block = block


class DegenerateDriverError(L0bseError, ArithmeticError):
    """Driver increments at a node do not span a non degenerate subspace."""

    def __init__(self, message: str, step: int, node: int) -> None:
        super().__init__(message)
        self.step = step
        self.node = node


class ConvergenceError(L0bseError, RuntimeError):
    """An iteration stopped before reaching its tolerance.

    The partial report is available on the ``report`` attribute.

    """

    def __init__(self, message: str, report: Any = None) -> None:
        super().__init__(message)
        self.report = report


class PropertyError(L0bseError, ArithmeticError):
    """A checked identity or inequality fails, the check report is on ``report``."""

    def __init__(self, message: str, report: Any = None) -> None:
        super().__init__(message)
        self.report = report


class SelfMapError(L0bseError, ValueError):
    """A sampled point of a conditional ball is mapped outside of the ball."""

    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


class ConfigError(L0bseError, ValueError):
    """Malformed run configuration, ``field`` holds the dotted field name."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
