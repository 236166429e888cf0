# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test conditional g-expectations and g risk measures"""

import numpy as np
import pytest

from l0bse.errors import BudgetError, MeasurabilityError, ParameterError, PartitionError
from l0bse.gexp import (
    GDriver,
    g_expectation,
    g_risk_measure,
    g_stability_check,
    lipschitz_estimate_check,
    risk_axioms_check,
    tilted_expectation,
)
from l0bse.probspace import L0Value, cond_expect, is_measurable, random_value


@pytest.mark.parametrize("t0", [pytest.param(t, id=str(t)) for t in range(4)])
def test_zero_driver_is_the_conditional_expectation(binomial, rng, t0):
    xi = random_value(binomial, rng)
    value = g_expectation(GDriver(), xi, t0)
    assert is_measurable(value, t0)
    assert np.allclose(value.values, cond_expect(xi, t0).values, atol=1e-10)


@pytest.mark.parametrize(
    "mu, method",
    [
        pytest.param(0.1, "zu", id="subintervals"),
        pytest.param(0.1, "induction", id="induction"),
        pytest.param(0.5, "auto", id="fallback"),
    ],
)
def test_linear_driver_matches_tilted_measure(binomial, rng, mu, method):
    xi = random_value(binomial, rng)
    for t0 in (0, 1):
        expected = tilted_expectation(binomial, xi, mu, t0)
        value = g_expectation(GDriver(mu=mu), xi, t0, method=method)
        assert np.allclose(value.values, expected.values, atol=1e-9)


def test_tilted_measure_on_uneven_tree(uneven, rng):
    xi = random_value(uneven, rng)
    value = g_expectation(GDriver(mu=0.2), xi, method="induction")
    assert np.allclose(value.values, tilted_expectation(uneven, xi, 0.2).values, atol=1e-10)


def test_subinterval_solver_rejects_steep_drivers(binomial, rng):
    with pytest.raises(BudgetError):
        g_expectation(GDriver(mu=0.5), random_value(binomial, rng), method="zu")


def test_constant_driver_shifts_values(binomial, rng):
    xi = random_value(binomial, rng)
    value = g_expectation(GDriver(h=0.3), xi, 1)
    expected = cond_expect(xi, 1).values + 0.3 * (binomial.horizon - binomial.grid[1])
    assert np.allclose(value.values, expected, atol=1e-10)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        pytest.param({"method": "fast"}, "Unknown method", id="method"),
        pytest.param({"t0": 4}, "t0 must lie", id="t0"),
    ],
)
def test_g_expectation_rejects(binomial, rng, kwargs, message):
    with pytest.raises(ParameterError, match=message):
        g_expectation(GDriver(), random_value(binomial, rng), **kwargs)


def test_driver_parameters():
    g = GDriver(a=-0.1, mu=0.2, kappa=0.3)
    assert g.lipschitz == pytest.approx(0.6)
    assert "kappa=0.3" in repr(g)
    with pytest.raises(ParameterError, match="kappa must be non negative"):
        GDriver(kappa=-1.0)


def test_lipschitz_estimate(binomial, rng):
    g = GDriver(a=0.1, mu=0.2, kappa=0.1)
    report = None
    for _ in range(5):
        report = lipschitz_estimate_check(
            g, random_value(binomial, rng), random_value(binomial, rng), 1, report=report
        )
    assert report.passed
    assert report.cases == 5


def test_g_stability(binomial, rng):
    g = GDriver(mu=0.2, kappa=0.1)
    xis = [random_value(binomial, rng) for _ in range(2)]
    assert g_stability_check(g, [range(4), range(4, 8)], xis, 1).passed
    with pytest.raises(PartitionError, match="partition 1"):
        g_stability_check(g, [range(2), range(2, 8)], xis, 1)
    with pytest.raises(ParameterError, match="2 blocks for 1"):
        g_stability_check(g, [range(4), range(4, 8)], xis[:1], 1)


def test_risk_measure_axioms(binomial, rng):
    g = GDriver(kappa=0.2)
    samples = [
        (
            random_value(binomial, rng),
            L0Value(binomial, np.abs(rng.normal(size=8))),
            random_value(binomial, rng, meas=1),
        )
        for _ in range(4)
    ]
    report = risk_axioms_check(g, samples, 1)
    assert report.passed, report.violations
    assert report.cases == 8


def test_risk_axioms_validate_samples(binomial, rng):
    xi = random_value(binomial, rng)
    negative = L0Value.constant(binomial, -1.0)
    with pytest.raises(ParameterError, match="non negative"):
        risk_axioms_check(GDriver(), [(xi, negative, L0Value.constant(binomial, 0.0))])
    with pytest.raises(MeasurabilityError, match="partition 0"):
        risk_axioms_check(GDriver(), [(xi, xi * 0.0, xi)])


def test_risk_measure_of_cash(binomial):
    rho = g_risk_measure(GDriver(kappa=0.5), L0Value.constant(binomial, 2.0))
    assert np.allclose(rho.values, -2.0)
    with pytest.raises(ParameterError, match="depend on z only"):
        g_risk_measure(GDriver(h=1.0), L0Value.constant(binomial, 2.0))
