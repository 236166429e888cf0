# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Lattice operations and countable concatenation on L0.

On a finite space every countable partition has finitely many non empty
blocks, so concatenation is a finite gluing of elements along the blocks of an
:class:`EventPartition`.

"""

from collections.abc import Callable, Sequence
from functools import singledispatch
from typing import Any

import numpy as np
from atom.api import Int, Typed

from .errors import DimensionError, ParameterError, PartitionError
from .probspace import FilteredSpace, L0Value, Partition
from .reporting import CheckReport


class EventPartition(Partition):
    """Partition of the atoms into events measurable w.r.t. a declared partition."""

    #: Space the events live in.
    space = Typed(FilteredSpace)

    #: Grid index of the partition every event is measurable against.
    declared = Int(0)

    def __init__(self, space: FilteredSpace, labels, declared: int = 0) -> None:
        super().__init__(labels)
        if self.n_atoms != space.n_atoms:
            raise PartitionError(
                f"Event labels cover {self.n_atoms} atoms, expected {space.n_atoms}"
            )
        if not space.partition(declared).refines(self):
            raise PartitionError(
                f"Events are not unions of blocks of partition {declared}"
            )
        self.space = space
        self.declared = declared

    @classmethod
    def from_blocks(  # type: ignore[override]
        cls,
        space: FilteredSpace,
        blocks: Sequence[Sequence[int] | np.ndarray],
        declared: int = 0,
    ) -> "EventPartition":
        """Build an event partition from atom index sets or boolean masks.

        Blocks are renumbered by their first atom, as for every partition.

        Raises
        ------
        PartitionError
            If the blocks overlap, do not cover the atoms, or are not unions of
            blocks of the declared partition.

        """
        indices = []
        for block in blocks:
            array = np.asarray(block)
            if array.dtype == bool:
                array = np.flatnonzero(array)
            indices.append(array)
        labels = Partition.from_blocks(space.n_atoms, indices).labels
        return cls(space, labels, declared)

    def masks(self) -> list[np.ndarray]:
        return [self.labels == b for b in range(self.n_blocks)]


def _check_family(family: Sequence[L0Value]) -> tuple[FilteredSpace, np.ndarray]:
    if not family:
        raise ParameterError("The family must not be empty")
    space = family[0].space
    for member in family:
        if member.space is not space:
            raise DimensionError("Family members live on different spaces")
        if member.dim != 1:
            raise DimensionError(
                f"Lattice operations need scalar values, got dimension {member.dim}"
            )
    return space, np.stack([member.scalar for member in family])


def l0_sup(family: Sequence[L0Value]) -> L0Value:
    """Supremum of a finite family of scalar values (per atom maximum)."""
    space, stacked = _check_family(family)
    return L0Value(space, stacked.max(axis=0))


def l0_inf(family: Sequence[L0Value]) -> L0Value:
    """Infimum of a finite family of scalar values (per atom minimum)."""
    space, stacked = _check_family(family)
    return L0Value(space, stacked.min(axis=0))


def _normalize_parts(parts: Sequence[tuple[Any, Any]], space: FilteredSpace):
    masks = []
    for block, _ in parts:
        mask = np.zeros(space.n_atoms, dtype=bool)
        array = np.asarray(block)
        if array.dtype == bool:
            if array.shape != (space.n_atoms,):
                raise PartitionError("Boolean blocks must have one entry per atom")
            mask |= array
        else:
            mask[array.astype(np.int64)] = True
        masks.append(mask)
    counts = np.sum(masks, axis=0)
    if np.any(counts > 1):
        raise PartitionError(
            f"Blocks overlap on atoms {np.flatnonzero(counts > 1).tolist()}"
        )
    if np.any(counts == 0):
        raise PartitionError(
            f"Blocks do not cover atoms {np.flatnonzero(counts == 0).tolist()}"
        )
    return masks


@singledispatch
def glue(element: Any, masks: Sequence[np.ndarray], elements: Sequence[Any]) -> Any:
    """Concatenate elements of the same kind along disjoint covering masks.

    ``element`` only selects the implementation; new element kinds register
    themselves with ``glue.register``.

    """
    raise TypeError(f"Elements of type {type(element).__name__} cannot be glued")


@glue.register
def _(element: L0Value, masks, elements) -> L0Value:
    values = np.zeros_like(element.values)
    for mask, member in zip(masks, elements):
        if member.space is not element.space or member.dim != element.dim:
            raise DimensionError("Glued values must share space and dimension")
        values[mask] = member.values[mask]
    return L0Value(element.space, values)


@glue.register
def _(element: tuple, masks, elements) -> tuple:
    return tuple(
        glue(first, masks, [member[i] for member in elements])
        for i, first in enumerate(element)
    )


def concatenate(parts: Sequence[tuple[Any, Any]]) -> Any:
    """Glue elements along blocks: the element agreeing with x_n on A_n.

    Parameters
    ----------
    parts : Sequence[tuple[block, element]]
        Blocks are atom index sequences or boolean masks forming a partition of
        the atoms, or an :class:`EventPartition` paired with a list of elements
        through :func:`concatenate_along`.

    Raises
    ------
    PartitionError
        If the blocks overlap or do not cover the atoms.

    """
    if not parts:
        raise ParameterError("Nothing to concatenate")
    first = parts[0][1]
    space = _space_of(first)
    masks = _normalize_parts(parts, space)
    return glue(first, masks, [element for _, element in parts])


def concatenate_along(partition: EventPartition, elements: Sequence[Any]) -> Any:
    """Glue one element per block of an event partition."""
    if len(elements) != partition.n_blocks:
        raise ParameterError(
            f"Expected {partition.n_blocks} elements, got {len(elements)}"
        )
    return concatenate(list(zip(partition.masks(), elements)))


def _space_of(element: Any) -> FilteredSpace:
    if isinstance(element, tuple):
        return _space_of(element[0])
    return element.space


def stable_sup_witness(
    family: Sequence[L0Value], eps: L0Value
) -> tuple[np.ndarray, L0Value]:
    """Element of the concatenation hull of the family within eps of its supremum.

    The family is finite so the supremum is attained: the selection picks, on
    every atom, the lowest index reaching the maximum.

    Returns
    -------
    selection : np.ndarray
        Index (0-based) of the selected member on every atom.
    witness : L0Value
        The family glued along the selection.

    Raises
    ------
    ParameterError
        If eps is not positive on every atom.

    """
    space, stacked = _check_family(family)
    if eps.dim != 1 or np.any(eps.scalar <= 0):
        raise ParameterError("eps must be a positive scalar on every atom")
    selection = np.argmax(stacked, axis=0)
    masks = [selection == i for i in range(len(family))]
    witness = glue(family[0], masks, list(family))
    return selection, witness


def random_event_partition(
    space: FilteredSpace,
    rng: np.random.Generator,
    *,
    declared: int = 0,
    n_blocks: int = 2,
) -> EventPartition:
    """Random grouping of the blocks of a declared partition into events."""
    partition = space.partition(declared)
    n_blocks = max(1, min(n_blocks, partition.n_blocks))
    groups = rng.permutation(np.arange(partition.n_blocks) % n_blocks)
    return EventPartition(space, groups[partition.labels], declared)


def stability_check(
    mapping: Callable[[Any], Any],
    samples: Sequence[tuple[EventPartition, Sequence[Any]]],
    *,
    tolerance: float = 1e-10,
    name: str = "stability",
) -> CheckReport:
    """Check that mapping commutes with concatenation on every sample.

    The deviation of a sample is the largest per atom difference between
    mapping(sum_n 1_{A_n} x_n) and sum_n 1_{A_n} mapping(x_n), relative to the
    magnitude of the outputs.

    """
    report = CheckReport(name=name, tolerance=tolerance)
    for i, (partition, elements) in enumerate(samples):
        glued = concatenate_along(partition, elements)
        lhs = mapping(glued)
        rhs = concatenate_along(partition, [mapping(x) for x in elements])
        report.check(relative_gap(lhs, rhs), f"sample {i}")
    return report


@singledispatch
def raw_values(element: Any) -> np.ndarray:
    """Flat per atom array view of a glueable element."""
    raise TypeError(f"No array view for {type(element).__name__}")


@raw_values.register
def _(element: L0Value) -> np.ndarray:
    return element.values


@raw_values.register
def _(element: tuple) -> np.ndarray:
    return np.concatenate([raw_values(e).reshape(-1) for e in element])


@raw_values.register
def _(element: np.ndarray) -> np.ndarray:
    return element


def relative_gap(lhs: Any, rhs: Any) -> float:
    """Largest absolute difference scaled by max(1, largest magnitude)."""
    a = np.asarray(raw_values(lhs), dtype=float)
    b = np.asarray(raw_values(rhs), dtype=float)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) / scale

