# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test the lattice operations and the concatenation of L0 elements"""

import numpy as np
import pytest
from hypothesis import given, strategies as st
from strategies import l0_values, spaces

from l0bse.errors import DimensionError, ParameterError, PartitionError
from l0bse.l0algebra import (
    EventPartition,
    concatenate,
    concatenate_along,
    l0_inf,
    l0_sup,
    random_event_partition,
    relative_gap,
    stability_check,
    stable_sup_witness,
)
from l0bse.probspace import L0Value, random_value


@given(data=st.data(), space=spaces())
def test_sup_inf_laws(data, space):
    x, y, z = (data.draw(l0_values(space)) for _ in range(3))
    sup, inf = l0_sup([x, y]), l0_inf([x, y])
    assert np.array_equal(sup.values, l0_sup([y, x]).values)
    assert np.allclose((sup + inf).values, (x + y).values)
    assert np.array_equal(
        l0_sup([l0_sup([x, y]), z]).values, l0_sup([x, l0_sup([y, z])]).values
    )
    assert np.all(sup.scalar >= x.scalar)
    assert np.all(inf.scalar <= y.scalar)


def test_lattice_rejects_bad_families(two_blocks, binomial, rng):
    with pytest.raises(ParameterError, match="empty"):
        l0_sup([])
    with pytest.raises(DimensionError, match="scalar"):
        l0_sup([random_value(two_blocks, rng, dim=2)])
    with pytest.raises(DimensionError, match="different spaces"):
        l0_inf([random_value(two_blocks, rng), random_value(binomial, rng)])


def test_event_partition_validation(two_blocks):
    events = EventPartition(two_blocks, two_blocks.base.labels)
    assert events.n_blocks == 2
    assert [mask.sum() for mask in events.masks()] == [8, 8]
    with pytest.raises(PartitionError, match="not unions of blocks"):
        EventPartition(two_blocks, np.arange(16) % 2)
    with pytest.raises(PartitionError, match="overlaps"):
        EventPartition.from_blocks(two_blocks, [range(8), range(4, 16)])
    masks = EventPartition.from_blocks(two_blocks, [two_blocks.base.labels == 1, range(8)])
    assert masks.blocks()[1].tolist() == list(range(8, 16))


def test_concatenate_agrees_on_blocks(two_blocks, rng):
    x, y = random_value(two_blocks, rng, dim=2), random_value(two_blocks, rng, dim=2)
    first = two_blocks.base.labels == 0
    glued = concatenate([(first, x), (~first, y)])
    assert np.array_equal(glued.values[first], x.values[first])
    assert np.array_equal(glued.values[~first], y.values[~first])


def test_concatenate_tuples(two_blocks, rng):
    pairs = [(random_value(two_blocks, rng), random_value(two_blocks, rng)) for _ in range(2)]
    events = EventPartition(two_blocks, two_blocks.base.labels)
    glued = concatenate_along(events, pairs)
    assert isinstance(glued, tuple)
    assert np.array_equal(glued[1].values[8:], pairs[1][1].values[8:])


@pytest.mark.parametrize(
    "blocks, message",
    [
        pytest.param([np.arange(10), np.arange(8, 16)], "overlap", id="overlap"),
        pytest.param([np.arange(4), np.arange(8, 16)], "do not cover", id="missing"),
    ],
)
def test_concatenate_rejects_invalid_blocks(two_blocks, rng, blocks, message):
    values = [random_value(two_blocks, rng) for _ in blocks]
    with pytest.raises(PartitionError, match=message):
        concatenate(list(zip(blocks, values)))


def test_concatenate_along_counts_elements(two_blocks, rng):
    events = EventPartition(two_blocks, two_blocks.base.labels)
    with pytest.raises(ParameterError, match="Expected 2 elements"):
        concatenate_along(events, [random_value(two_blocks, rng)])


def test_stable_sup_witness(two_blocks, rng):
    family = [random_value(two_blocks, rng) for _ in range(4)]
    eps = L0Value.constant(two_blocks, 1e-3)
    selection, witness = stable_sup_witness(family, eps)
    sup = l0_sup(family)
    assert np.all(witness.scalar > sup.scalar - eps.scalar)
    assert np.array_equal(witness.scalar, np.stack([f.scalar for f in family])[selection, np.arange(16)])
    with pytest.raises(ParameterError, match="positive"):
        stable_sup_witness(family, L0Value.constant(two_blocks, 0.0))


def test_random_event_partition(two_blocks, rng):
    events = random_event_partition(two_blocks, rng, declared=1, n_blocks=3)
    assert events.n_blocks == 3
    assert two_blocks.partitions[1].refines(events)


def test_stability_check_detects_unstable_maps(two_blocks, rng):
    events = EventPartition(two_blocks, two_blocks.base.labels)
    samples = [(events, [random_value(two_blocks, rng) for _ in range(2)])]
    slope = random_value(two_blocks, rng, meas=0)

    def stable(x: L0Value) -> L0Value:
        return L0Value(x.space, np.sin(x.values)) * slope

    def unstable(x: L0Value) -> L0Value:
        # Mixes information across the blocks of partition 0.
        return L0Value.constant(x.space, float(np.mean(x.values)))

    assert stability_check(stable, samples).passed
    report = stability_check(unstable, samples)
    assert not report.passed
    assert report.cases == 1


def test_relative_gap_scales():
    assert relative_gap(np.array([10.0]), np.array([11.0])) == pytest.approx(1.0 / 11.0)
    assert relative_gap(np.array([0.1]), np.array([0.2])) == pytest.approx(0.1)


@given(data=st.data(), space=spaces(), seed=st.integers(0, 2**32 - 1))
def test_concatenation_stability(data, space, seed):
    rng = np.random.default_rng(seed)
    declared = data.draw(st.integers(0, space.n_steps))
    events = random_event_partition(space, rng, declared=declared, n_blocks=2)
    parts = [data.draw(l0_values(space, dim=2)) for _ in range(events.n_blocks)]
    glued = concatenate_along(events, parts)
    for mask, part in zip(events.masks(), parts):
        assert np.array_equal(glued.values[mask], part.values[mask])
    slope = data.draw(l0_values(space, meas=declared))

    def lipschitz(x: L0Value) -> L0Value:
        return L0Value(x.space, np.sin(x.values)) * slope

    assert stability_check(lipschitz, [(events, parts)]).passed
