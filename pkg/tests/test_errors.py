# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test the error hierarchy"""

import pytest

from l0bse.errors import (
    BudgetError,
    ConfigError,
    ConvergenceError,
    DegenerateDriverError,
    DimensionError,
    L0bseError,
    MeasurabilityError,
    ParameterError,
    PartitionError,
    PropertyError,
    SelfMapError,
    SpaceError,
)


@pytest.mark.parametrize(
    "error, builtin",
    [
        pytest.param(SpaceError("x"), ValueError, id="space"),
        pytest.param(PartitionError("x"), ValueError, id="partition"),
        pytest.param(MeasurabilityError("x"), ValueError, id="measurability"),
        pytest.param(DimensionError("x"), ValueError, id="dimension"),
        pytest.param(ParameterError("x"), ValueError, id="parameter"),
        pytest.param(BudgetError("x", 1), ValueError, id="budget"),
        pytest.param(DegenerateDriverError("x", 0, 1), ArithmeticError, id="degenerate"),
        pytest.param(ConvergenceError("x"), RuntimeError, id="convergence"),
        pytest.param(SelfMapError("x"), ValueError, id="self-map"),
        pytest.param(PropertyError("x"), ArithmeticError, id="property"),
        pytest.param(ConfigError("solver.tol", "x"), ValueError, id="config"),
    ],
)
def test_errors_derive_from_builtins(error, builtin):
    assert isinstance(error, L0bseError)
    assert isinstance(error, builtin)


def test_budget_error_is_a_parameter_error():
    error = BudgetError("coefficient too large", 3)
    assert isinstance(error, ParameterError)
    assert error.block == 3


def test_errors_carry_context():
    witness = object()
    assert SelfMapError("outside", witness=witness).witness is witness
    assert ConvergenceError("stuck", report="partial").report == "partial"
    assert PropertyError("margin", report="checks").report == "checks"
    degenerate = DegenerateDriverError("singular", 2, 5)
    assert (degenerate.step, degenerate.node) == (2, 5)


def test_config_error_names_the_field():
    error = ConfigError("space.branching", "missing")
    assert error.field == "space.branching"
    with pytest.raises(ConfigError, match="space.branching: missing"):
        raise error
