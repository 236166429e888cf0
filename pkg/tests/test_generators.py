# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test the generator catalog"""

import math

import numpy as np
import pytest

from l0bse.bsecore import GENERATOR_KINDS, G_map, base_parameter, eval_generator
from l0bse.errors import DimensionError, MeasurabilityError, ParameterError
from l0bse.generators import (
    BoundedIntegralGenerator,
    BoundedLipschitzGenerator,
    DelayedGenerator,
    IntegralGenerator,
    PointwiseGenerator,
    RandomMeasure,
    ZUGenerator,
    make_generator,
    radial_clamp,
)
from l0bse.probspace import L0Value, random_value
from l0bse.processes import (
    AdaptedProcess,
    basis_drivers,
    random_martingale,
    stochastic_integral,
)


def test_catalog_kinds():
    assert {
        "zero",
        "integral",
        "pointwise",
        "zu",
        "delayed",
        "path-functional",
        "bounded-lipschitz",
        "bounded-integral",
    } <= set(GENERATOR_KINDS)


@pytest.mark.parametrize(
    "kind, parameters, message",
    [
        pytest.param("quadratic", {}, "Unknown generator kind", id="unknown"),
        pytest.param("zero", {"a": 1.0}, "Invalid parameters", id="unexpected"),
        pytest.param("integral", {"p": 1.0}, "p must be > 1", id="exponent"),
        pytest.param("pointwise", {"kappa": -1.0}, "non negative", id="kappa"),
    ],
)
def test_make_generator_rejects(two_blocks, kind, parameters, message):
    with pytest.raises(ParameterError, match=message):
        make_generator(kind, two_blocks, **parameters)


def test_base_parameter_shapes(two_blocks):
    assert base_parameter(two_blocks, 2.0, "x").scalar.tolist() == [2.0] * 16
    per_block = base_parameter(two_blocks, [1.0, 3.0], "x").scalar
    assert per_block.tolist() == [1.0] * 8 + [3.0] * 8
    per_atom = np.repeat([4.0, 5.0], 8)
    assert base_parameter(two_blocks, per_atom, "x").scalar.tolist() == per_atom.tolist()
    with pytest.raises(MeasurabilityError, match="x must be measurable"):
        base_parameter(two_blocks, np.arange(16.0), "x")
    with pytest.raises(DimensionError, match="x: expected"):
        base_parameter(two_blocks, [1.0, 2.0, 3.0], "x")


def test_integral_lipschitz_constants(two_blocks):
    F = IntegralGenerator(two_blocks, a=[0.1, -0.2], b=0.3, c=0.05, e=[0.0, 0.1])
    assert F.c1.scalar[[0, 8]].tolist() == pytest.approx([0.4, 0.5])
    assert F.c2.scalar[[0, 8]].tolist() == pytest.approx([0.15, 0.35])
    assert not F.y_independent
    declared = IntegralGenerator(two_blocks, a=0.1, c1=0.5)
    assert declared.c1.scalar[0] == 0.5
    with pytest.raises(ParameterError, match="below the Lipschitz constant"):
        IntegralGenerator(two_blocks, a=0.1, b=0.1, c1=0.1)


def test_integral_generator_values(binomial, rng):
    F = IntegralGenerator(binomial, h=1.0, a=0.5)
    Y = AdaptedProcess.zeros(binomial)
    M = random_martingale(binomial, rng)
    values = eval_generator(F, Y, M).values
    assert np.allclose(values[:, :, 0], binomial.grid[:, None])


def test_parameters_report(two_blocks):
    described = IntegralGenerator(two_blocks, h=[1.0, 2.0], phi="tanh").parameters()
    assert described["kind"] == "integral"
    assert described["h"] == [1.0, 2.0]
    assert described["phi"] == "tanh"
    assert described["p"] == 2.0


def test_radial_clamp():
    values = np.array([[3.0, 4.0], [0.3, 0.4], [0.0, 0.0]])
    clamped = radial_clamp(values, np.array([[1.0], [1.0], [1.0]]))
    assert np.allclose(clamped, [[0.6, 0.8], [0.3, 0.4], [0.0, 0.0]])


def test_pointwise_generator_reads_coefficients(marked, rng):
    F = PointwiseGenerator(marked, h=0.5, m=[0.2, -0.2], nu=[0.3], kappa=0.1)
    drivers = basis_drivers(marked)
    theta = np.zeros((marked.n_steps, marked.n_atoms, len(drivers), 1))
    theta[:, :, 0] = 2.0
    theta[:, :, 1] = -1.0
    M = stochastic_integral(theta, drivers)
    terminal = eval_generator(F, AdaptedProcess.zeros(marked), M).terminal.scalar
    expected = marked.horizon * (0.5 + 2.0 * F.m.scalar - 0.3 + 0.2)
    assert np.allclose(terminal, expected)


def test_pointwise_lipschitz(marked):
    F = PointwiseGenerator(marked, a=0.1, m=0.2, nu=[0.3], kappa=0.1)
    # Every mark has probability 1/4 on steps of length 1/2.
    expected = 0.4 + math.sqrt(0.3**2 / 0.5)
    assert np.allclose(F.lipschitz().scalar, expected)
    weighted = F.with_weights(np.full((2, marked.n_atoms), 2.0))
    assert np.allclose(weighted.lipschitz().scalar, 2.0 * expected)


def test_pointwise_checks_marks(marked, two_blocks):
    with pytest.raises(ParameterError, match="one nu coefficient per mark"):
        PointwiseGenerator(marked, nu=[0.1, 0.2])
    with pytest.raises(MeasurabilityError, match="Step weights"):
        ZUGenerator(two_blocks, step_weights=np.arange(48.0).reshape(3, 16))
    assert ZUGenerator(marked, m=0.5).y_independent


def test_random_measure(two_blocks):
    measure = RandomMeasure.from_blocks(two_blocks, [[1.0, 0.0, 0.0, 1.0], [0.5] * 4])
    assert measure.total().scalar[[0, 8]].tolist() == [2.0, 2.0]
    assert measure.tail_weights()[:, 0].tolist() == [1.0, 1.0, 1.0]
    assert measure.tail_weights()[:, 8].tolist() == [1.5, 1.0, 0.5]
    assert RandomMeasure.uniform(two_blocks, 2.0).total().scalar[0] == pytest.approx(2.0)
    with pytest.raises(ParameterError, match="non negative"):
        RandomMeasure(two_blocks, [1.0, -1.0, 0.0, 0.0])
    with pytest.raises(MeasurabilityError):
        RandomMeasure(two_blocks, np.arange(64.0).reshape(4, 16))
    with pytest.raises(DimensionError):
        RandomMeasure.from_blocks(two_blocks, [[1.0, 0.0]])


def test_delayed_point_mass_is_undelayed(marked, rng):
    g = ZUGenerator(marked, h=0.1, m=0.5, nu=[0.2])
    F = DelayedGenerator(marked, g)
    M = random_martingale(marked, rng)
    Y = AdaptedProcess.zeros(marked)
    assert np.allclose(eval_generator(F, Y, M).values, eval_generator(g, Y, M).values)


def test_delayed_swap(marked, rng):
    F = DelayedGenerator(marked, v=[[0.5, 0.3, 0.2], [0.0, 1.0, 0.4]], m=0.5, nu=[0.2])
    for _ in range(5):
        assert F.swap_gap(random_martingale(marked, rng)) < 1e-12
    assert np.allclose(F.lipschitz().scalar, F.measure.total().scalar * F.g.lipschitz().scalar)


def test_delayed_rejects(marked):
    with pytest.raises(ParameterError, match="must not depend on y"):
        DelayedGenerator(marked, PointwiseGenerator(marked, a=0.1))
    with pytest.raises(ParameterError, match="not both"):
        DelayedGenerator(marked, ZUGenerator(marked), m=0.1)


def test_bounded_lipschitz_map(two_blocks, rng):
    F = BoundedLipschitzGenerator(two_blocks, bound=[0.5, 2.0])
    xi, V = random_value(two_blocks, rng), random_value(two_blocks, rng)
    expected = xi.values + radial_clamp(V.values, F.bound.values) / 4.0
    assert np.allclose(G_map(F, xi, V, 1e-12).values, expected)


def test_bounded_integral_values(binomial, rng):
    F = BoundedIntegralGenerator(binomial, bound=1.0, p=math.inf)
    M = random_martingale(binomial, rng, scale=10.0)
    values = eval_generator(F, AdaptedProcess.zeros(binomial), M).values
    # Clamped increments never exceed B dt / (2 T).
    assert np.all(np.abs(np.diff(values, axis=0)) <= 0.5 * binomial.dt + 1e-15)


def test_generator_parameters_must_live_on_the_space(two_blocks, binomial):
    with pytest.raises(DimensionError, match="generator space"):
        IntegralGenerator(two_blocks, h=L0Value.constant(binomial, 1.0))
