# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test adapted processes, martingales and the martingale decomposition"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from strategies import FINITE, l0_values, spaces

from l0bse.errors import DegenerateDriverError, MeasurabilityError, ParameterError
from l0bse.l0algebra import concatenate
from l0bse.probspace import L0Value, block_average, build_space, random_value
from l0bse.processes import (
    AdaptedProcess,
    MartingaleProcess,
    basis_drivers,
    cond_fubini_check,
    cond_orthogonality_check,
    doob_check,
    doob_constant,
    isometry_residual,
    mark_intensities,
    martingale_decompose,
    martingale_from_terminal,
    project_step,
    random_martingale,
    random_process,
    representation_bound_check,
    sp_norm,
    stochastic_integral,
)


def test_adapted_process_measurability(binomial):
    values = np.zeros((4, 8))
    values[1, :4] = 1.0
    process = AdaptedProcess(binomial, values)
    assert process.dim == 1
    assert process.n_steps == 3
    values[1, 0] = 2.0
    with pytest.raises(MeasurabilityError, match="time index 1"):
        AdaptedProcess(binomial, values)


def test_martingale_identity(binomial, rng):
    M = random_martingale(binomial, rng, dim=2)
    assert M.starts_at_zero
    for k in range(binomial.n_steps):
        assert np.allclose(block_average(binomial, M.values[k + 1], k), M.values[k])
    broken = M.values.copy()
    broken[-1] += 1.0
    with pytest.raises(MeasurabilityError, match="Martingale identity"):
        MartingaleProcess(binomial, broken)


def test_process_arithmetic_keeps_martingales(two_blocks, rng):
    M = random_martingale(two_blocks, rng)
    N = random_martingale(two_blocks, rng)
    assert isinstance(M + N, MartingaleProcess)
    assert isinstance(M * random_value(two_blocks, rng, meas=0), MartingaleProcess)
    assert not isinstance(M + random_process(two_blocks, rng), MartingaleProcess)
    assert isinstance(-M, MartingaleProcess)


def test_martingale_from_terminal(uneven, rng):
    V = random_value(uneven, rng)
    M = martingale_from_terminal(V)
    assert M.starts_at_zero
    assert np.allclose(M.terminal.values, block_average(uneven, V.values, 0) - V.values)


def test_glue_processes(two_blocks, rng):
    M, N = random_martingale(two_blocks, rng), random_martingale(two_blocks, rng)
    first = two_blocks.base.labels == 0
    glued = concatenate([(first, M), (~first, N)])
    assert isinstance(glued, MartingaleProcess)
    assert np.array_equal(glued.values[:, ~first], N.values[:, ~first])


@pytest.mark.parametrize(
    "p, expected",
    [
        pytest.param(2.0, 2.0, id="2"),
        pytest.param(4.0, 4.0 / 3.0, id="4"),
        pytest.param(math.inf, 1.0, id="inf"),
    ],
)
def test_doob_constant(p, expected):
    assert doob_constant(p) == pytest.approx(expected)


def test_doob_constant_rejects_p_one():
    with pytest.raises(ParameterError, match="p must be > 1"):
        doob_constant(1.0)


@pytest.mark.parametrize(
    "p", [pytest.param(1.5, id="1.5"), pytest.param(2.0, id="2"), pytest.param(4.0, id="4"), pytest.param(math.inf, id="inf")]
)
@given(data=st.data(), space=spaces())
def test_conditional_doob(data, space, p):
    M = martingale_from_terminal(data.draw(l0_values(space, dim=2)))
    report = doob_check(M, p)
    assert report.passed, report.violations


def test_sp_norm_is_running_max(two_blocks):
    values = np.zeros((4, 16))
    values[2] = np.repeat([3.0, -1.0, 0.0, 2.0], 4)
    Y = AdaptedProcess(two_blocks, values)
    assert sp_norm(Y, math.inf).scalar.tolist() == [3.0] * 8 + [2.0] * 8


def test_basis_drivers_are_martingales(uneven):
    walk, *marks = basis_drivers(uneven)
    assert walk.label == "W"
    assert marks == []
    assert walk.starts_at_zero
    # The third child of a node is an excess branch the walk does not see.
    assert np.all(walk.increments()[1][uneven.branches[:, 1] == 2] == 0.0)


def test_even_walk_steps(binomial):
    walk = basis_drivers(binomial)[0]
    assert np.allclose(np.abs(walk.increments()), math.sqrt(binomial.dt))


def test_marks_and_intensities(marked):
    drivers = basis_drivers(marked)
    assert [d.label for d in drivers] == ["W", "N1"]
    intensities = mark_intensities(marked)
    assert intensities.shape == (2, marked.n_atoms, 1)
    assert np.allclose(intensities, 0.25 / marked.dt)


def test_decomposition_roundtrip(marked, rng):
    drivers = basis_drivers(marked)
    theta = rng.normal(size=(marked.n_steps, marked.n_atoms, len(drivers), 2))
    for s in range(marked.n_steps):
        theta[s] = theta[s][marked.partitions[s].representatives]
    constructed = stochastic_integral(theta, drivers)
    decomposition = martingale_decompose(constructed, drivers)
    assert np.allclose(decomposition.coefficients, theta, atol=1e-10)
    assert np.allclose(decomposition.remainder.values, 0.0, atol=1e-10)
    assert np.allclose(decomposition.reconstruct().values, constructed.values)


def test_decomposition_with_excess_branch(marked, rng):
    M = random_martingale(marked, rng)
    decomposition = martingale_decompose(M, basis_drivers(marked))
    assert decomposition.z.shape == (2, marked.n_atoms, 1)
    assert decomposition.u.shape == (2, marked.n_atoms, 1, 1)
    # The fourth child of every node is seen by no driver.
    assert np.max(np.abs(decomposition.remainder.values)) > 1e-6
    assert isometry_residual(decomposition) < 1e-10
    assert np.allclose(decomposition.reconstruct().values, M.values)
    assert representation_bound_check(decomposition).passed


def test_decomposition_scales_linearly(two_blocks, rng):
    M = random_martingale(two_blocks, rng)
    drivers = basis_drivers(two_blocks)
    base = martingale_decompose(M, drivers)
    scaled = martingale_decompose(M * 3.0, drivers)
    assert np.allclose(scaled.coefficients, 3.0 * base.coefficients)


def test_single_child_nodes_get_zero_coefficients(rng):
    space = build_space([1, 2])
    M = random_martingale(space, rng)
    decomposition = martingale_decompose(M, basis_drivers(space))
    assert np.all(decomposition.coefficients[0] == 0.0)


def test_degenerate_drivers(binomial):
    walk = basis_drivers(binomial)[0]
    increments = walk.increments()[0]
    duplicated = np.concatenate([increments, increments], axis=1)
    with pytest.raises(DegenerateDriverError, match="degenerate at step 0") as e:
        project_step(binomial, 0, duplicated, increments)
    assert e.value.step == 0


def test_predictable_coefficients_are_required(binomial, rng):
    theta = rng.normal(size=(binomial.n_steps, binomial.n_atoms, 1, 1))
    with pytest.raises(MeasurabilityError, match="not predictable"):
        stochastic_integral(theta, basis_drivers(binomial))


def test_conditional_orthogonality(uneven, rng):
    assert cond_orthogonality_check(random_value(uneven, rng, dim=2)).passed


def test_conditional_fubini(uneven, rng):
    table = rng.normal(size=(uneven.n_atoms, 3))
    assert cond_fubini_check(uneven, table, [0.2, 0.5, 1.0]).passed

    def f(atom: int, mark: int) -> float:
        return float(atom * (mark + 1))

    assert cond_fubini_check(uneven, f, [1.0, 2.0]).passed
    with pytest.raises(ParameterError, match="non negative"):
        cond_fubini_check(uneven, table, [-1.0, 0.0, 0.0])


@given(
    data=st.data(),
    space=spaces(),
    mu=st.lists(st.floats(min_value=0.0, max_value=2.0), min_size=1, max_size=4),
)
def test_conditional_fubini_property(data, space, mu):
    table = data.draw(arrays(np.float64, (space.n_atoms, len(mu)), elements=FINITE))
    base = data.draw(st.integers(0, space.n_steps))
    assert cond_fubini_check(space, table, mu, base).passed


def test_from_values_and_accessors(binomial, rng):
    values = [L0Value.constant(binomial, float(k)) for k in range(4)]
    process = AdaptedProcess.from_values(values, label="ramp")
    assert process.terminal.scalar.tolist() == [3.0] * 8
    assert process.initial.scalar.tolist() == [0.0] * 8
    assert process.running_max().tolist() == [3.0] * 8
    assert "ramp" in repr(process)
