# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Finite filtered probability spaces and conditional expectations.

A space is a scenario tree: a finite set of atoms with positive weights and one
partition of the atoms per time of a uniform grid, each partition refining the
previous one. Random variables are stored as one real vector per atom.

"""

import itertools
import math
from collections.abc import Sequence
from typing import Any, Union

import numpy as np
from atom.api import Atom, Float, Int, Tuple, Typed

from .errors import DimensionError, MeasurabilityError, PartitionError, SpaceError

#: Tolerance used when validating probabilities and weights.
PROBABILITY_TOLERANCE = 1e-12


def frozen_array(values, dtype=float) -> np.ndarray:
    """Copy values into a read-only numpy array."""
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


class Partition(Atom):
    """Partition of the atoms of a finite space.

    Blocks are numbered by order of first occurrence so that two partitions
    with the same blocks have identical labels.

    """

    #: Block label of every atom.
    labels = Typed(np.ndarray)

    #: Number of blocks.
    n_blocks = Int()

    #: Index of the first atom of the block containing each atom.
    representatives = Typed(np.ndarray)

    #: Index of the first atom of every block, in block order.
    leaders = Typed(np.ndarray)

    def __init__(self, labels) -> None:
        raw = np.asarray(labels)
        if raw.ndim != 1 or raw.size == 0:
            raise PartitionError(
                f"Partition labels must be a non-empty 1d sequence, got shape {raw.shape}"
            )
        _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first)] = np.arange(first.size)
        canonical = rank[inverse.ravel()]
        super().__init__(
            labels=frozen_array(canonical, dtype=np.int64),
            n_blocks=int(first.size),
            representatives=frozen_array(first[inverse.ravel()], dtype=np.int64),
            leaders=frozen_array(np.sort(first), dtype=np.int64),
        )

    @classmethod
    def from_blocks(cls, n_atoms: int, blocks: Sequence[Sequence[int]]) -> "Partition":
        """Build a partition from explicit blocks of atom indices.

        Raises
        ------
        PartitionError
            If the blocks overlap or do not cover all the atoms.

        """
        labels = np.full(n_atoms, -1, dtype=np.int64)
        for i, block in enumerate(blocks):
            index = np.asarray(block, dtype=np.int64)
            if index.size == 0:
                raise PartitionError(f"Block {i} is empty")
            if np.any(labels[index] >= 0):
                raise PartitionError(f"Block {i} overlaps a previous block")
            labels[index] = i
        if np.any(labels < 0):
            missing = np.flatnonzero(labels < 0).tolist()
            raise PartitionError(f"Blocks do not cover the atoms {missing}")
        return cls(labels)

    @property
    def n_atoms(self) -> int:
        return self.labels.size

    def blocks(self) -> list[np.ndarray]:
        """Atom indices of each block, in block order."""
        return [np.flatnonzero(self.labels == b) for b in range(self.n_blocks)]

    def block_of(self, atom: int) -> int:
        return int(self.labels[atom])

    def refines(self, other: "Partition") -> bool:
        """Whether every block of self lies inside a block of other."""
        if other.n_atoms != self.n_atoms:
            return False
        return bool(np.array_equal(other.labels, other.labels[self.representatives]))

    def join(self, other: "Partition") -> "Partition":
        """Coarsest common refinement of two partitions."""
        if other.n_atoms != self.n_atoms:
            raise PartitionError(
                f"Cannot join partitions over {self.n_atoms} and {other.n_atoms} atoms"
            )
        return Partition(self.labels * other.n_blocks + other.labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return bool(np.array_equal(self.labels, other.labels))

    def __hash__(self) -> int:
        return hash(self.labels.tobytes())

    def __repr__(self) -> str:
        return f"Partition({[b.tolist() for b in self.blocks()]})"


PartitionLike = Union[int, Partition]


class FilteredSpace(Atom):
    """Finite filtered probability space over a uniform time grid.

    Use :func:`build_space` to create tree shaped spaces.

    """

    #: Positive probability of every atom.
    weights = Typed(np.ndarray)

    #: Strictly increasing uniform time grid t_0 < ... < t_N.
    grid = Typed(np.ndarray)

    #: One partition per grid time, each refining its predecessor.
    partitions = Tuple(Partition)

    #: Child index taken by each atom on each step, shape (n_atoms, N).
    branches = Typed(np.ndarray)

    #: Number of jump marks carried by the children of every node.
    marks = Int(0)

    #: Index of grid[0] in the grid of the space this one was restricted from.
    start_index = Int(0)

    #: Step of the grid.
    dt = Float()

    def __init__(
        self,
        weights,
        grid,
        partitions: Sequence[Partition],
        branches=None,
        *,
        marks: int = 0,
        start_index: int = 0,
    ) -> None:
        weights = frozen_array(weights)
        grid = frozen_array(grid)
        if weights.ndim != 1 or weights.size == 0:
            raise SpaceError("Weights must be a non-empty 1d sequence")
        if np.any(weights <= 0):
            raise SpaceError(
                f"Atom weights must be positive, got {weights[weights <= 0].tolist()}"
            )
        if abs(weights.sum() - 1.0) > PROBABILITY_TOLERANCE * weights.size:
            raise SpaceError(f"Atom weights sum to {weights.sum()!r} instead of 1")
        if grid.ndim != 1 or grid.size < 2:
            raise SpaceError("The time grid needs at least two points")
        steps = np.diff(grid)
        if np.any(steps <= 0):
            raise SpaceError("The time grid must be strictly increasing")
        if np.ptp(steps) > 1e-12 * max(1.0, abs(grid[-1])):
            raise SpaceError("The time grid must be uniform")
        partitions = tuple(partitions)
        if len(partitions) != grid.size:
            raise SpaceError(
                f"Expected one partition per grid time ({grid.size}), "
                f"got {len(partitions)}"
            )
        for k, partition in enumerate(partitions):
            if partition.n_atoms != weights.size:
                raise PartitionError(
                    f"Partition {k} covers {partition.n_atoms} atoms, "
                    f"expected {weights.size}"
                )
            if k and not partition.refines(partitions[k - 1]):
                raise PartitionError(f"Partition {k} does not refine partition {k - 1}")
        if branches is None:
            branches = np.zeros((weights.size, grid.size - 1), dtype=np.int64)
        branches = frozen_array(branches, dtype=np.int64)
        if branches.shape != (weights.size, grid.size - 1):
            raise SpaceError(
                f"Branch indices must have shape {(weights.size, grid.size - 1)}, "
                f"got {branches.shape}"
            )
        super().__init__(
            weights=weights,
            grid=grid,
            partitions=partitions,
            branches=branches,
            marks=marks,
            start_index=start_index,
            dt=float(steps[0]),
        )

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    @property
    def horizon(self) -> float:
        """Length T of the time interval covered by the grid."""
        return float(self.grid[-1] - self.grid[0])

    @property
    def base(self) -> Partition:
        return self.partitions[0]

    @property
    def finest(self) -> Partition:
        return self.partitions[-1]

    @property
    def atoms(self) -> tuple[str, ...]:
        """Identifiers of the atoms, the dotted path of branch indices.

        The path is prefixed by the initial block when F_0 is not trivial.

        """
        prefix = self.base.n_blocks > 1
        return tuple(
            ".".join([str(block)] * prefix + [str(b) for b in row]) or "0"
            for block, row in zip(self.base.labels, self.branches)
        )

    def trivial_partition(self) -> Partition:
        return Partition(np.zeros(self.n_atoms, dtype=np.int64))

    def partition(self, sigma: PartitionLike) -> Partition:
        """Resolve a grid index or check an explicit partition against the space.

        Raises
        ------
        PartitionError
            If sigma is neither a grid index nor a coarsening of the finest
            partition of the space.

        """
        if isinstance(sigma, Partition):
            if sigma.n_atoms != self.n_atoms or not self.finest.refines(sigma):
                raise PartitionError(
                    f"{sigma!r} is not a coarsening of the finest partition of the space"
                )
            return sigma
        index = int(sigma)
        if not -len(self.partitions) <= index < len(self.partitions):
            raise PartitionError(
                f"Grid index {index} out of range for {len(self.partitions)} partitions"
            )
        return self.partitions[index]

    def block_weights(self, sigma: PartitionLike) -> np.ndarray:
        partition = self.partition(sigma)
        return np.bincount(
            partition.labels, weights=self.weights, minlength=partition.n_blocks
        )

    def conditional_weights(self, sigma: PartitionLike) -> np.ndarray:
        """Weight of every atom relative to the weight of its block."""
        partition = self.partition(sigma)
        return self.weights / self.block_weights(partition)[partition.labels]

    def restricted(self, t0: int) -> "FilteredSpace":
        """The same atoms observed on the grid t_{t0}, ..., t_N only.

        The returned space has partitions[t0] as its initial partition.

        """
        if not 0 <= t0 < self.n_steps:
            raise SpaceError(f"Start index {t0} must lie in [0, {self.n_steps})")
        return FilteredSpace(
            self.weights,
            self.grid[t0:],
            self.partitions[t0:],
            self.branches[:, t0:],
            marks=self.marks,
            start_index=self.start_index + t0,
        )

    def __repr__(self) -> str:
        return (
            f"FilteredSpace(n_atoms={self.n_atoms}, n_steps={self.n_steps}, "
            f"horizon={self.horizon}, base_blocks={self.base.n_blocks})"
        )


def _check_probabilities(probabilities, branching: int, where: str) -> np.ndarray:
    if probabilities is None:
        return np.full(branching, 1.0 / branching)
    probabilities = np.asarray(probabilities, dtype=float)
    if probabilities.shape != (branching,):
        raise SpaceError(
            f"{where}: expected {branching} probabilities, got {probabilities.size}"
        )
    if np.any(probabilities <= 0):
        raise SpaceError(f"{where}: probabilities must be positive")
    if abs(probabilities.sum() - 1.0) > PROBABILITY_TOLERANCE:
        raise SpaceError(
            f"{where}: probabilities sum to {probabilities.sum()!r} instead of 1"
        )
    return probabilities


def _node_probabilities(probabilities, branching: int, nodes: int, where: str) -> np.ndarray:
    """One row of edge probabilities per node, nodes in lexicographic path order."""
    if probabilities is None or np.ndim(probabilities) == 1:
        row = _check_probabilities(probabilities, branching, where)
        return np.tile(row, (nodes, 1))
    if len(probabilities) != nodes:
        raise SpaceError(
            f"{where}: expected probabilities for {nodes} nodes, got {len(probabilities)}"
        )
    return np.stack(
        [
            _check_probabilities(row, branching, f"{where} node {n}")
            for n, row in enumerate(probabilities)
        ]
    )


def build_space(
    branching: Sequence[int],
    probabilities: Sequence[Any] | None = None,
    *,
    base_branching: int = 1,
    base_probabilities: Sequence[float] | None = None,
    marks: int = 0,
    horizon: float = 1.0,
) -> FilteredSpace:
    """Build a tree shaped filtered space.

    Parameters
    ----------
    branching : Sequence[int]
        Number of children of every node, per step. The grid has
        ``len(branching)`` steps.
    probabilities : Sequence | None, optional
        Edge probabilities per step: a single row shared by all the nodes of
        the step or one row per node, nodes in lexicographic path order. None
        (globally or for a step) means uniform.
    base_branching : int, optional
        Number of scenarios already revealed at t_0, making F_0 non trivial.
    base_probabilities : Sequence[float] | None, optional
        Probabilities of the initial scenarios, uniform by default.
    marks : int, optional
        Number of jump marks per node. Children 0 and 1 drive the random walk,
        children 2 to 1 + marks the marks and any further child is an excess
        branch seen by neither driver.
    horizon : float, optional
        Terminal time T.

    Returns
    -------
    FilteredSpace
        Atoms ordered lexicographically by path, atom weight the product of the
        edge probabilities along the path.

    Raises
    ------
    SpaceError
        If a branching factor is not positive, if probabilities are not positive
        or do not sum to 1 per node, or if a step cannot carry the marks.

    """
    branching = list(branching)
    if not branching:
        raise SpaceError("At least one step is required")
    for k, b in enumerate([base_branching, *branching]):
        if int(b) != b or b < 1:
            raise SpaceError(f"Branching factors must be positive integers, got {b!r}")
    if marks < 0:
        raise SpaceError(f"The number of marks must be non negative, got {marks}")
    if marks and min(branching) < 2 + marks:
        raise SpaceError(
            f"Every step needs at least {2 + marks} children to carry {marks} marks"
        )
    if horizon <= 0:
        raise SpaceError(f"The horizon must be positive, got {horizon}")
    if probabilities is None:
        probabilities = [None] * len(branching)
    if len(probabilities) != len(branching):
        raise SpaceError(
            f"Expected edge probabilities for {len(branching)} steps, "
            f"got {len(probabilities)}"
        )

    levels = [int(base_branching), *(int(b) for b in branching)]
    edge = [_check_probabilities(base_probabilities, levels[0], "base")[None]]
    edge.extend(
        _node_probabilities(p, b, math.prod(levels[: k + 1]), f"step {k}")
        for k, (p, b) in enumerate(zip(probabilities, levels[1:]))
    )
    paths = np.array(list(itertools.product(*(range(b) for b in levels))), dtype=np.int64)
    weights = np.ones(len(paths))
    for level, table in enumerate(edge):
        node = np.ravel_multi_index(tuple(paths[:, :level].T), levels[:level]) if level else 0
        weights = weights * table[node, paths[:, level]]

    partitions = []
    for k in range(len(branching) + 1):
        _, labels = np.unique(paths[:, : k + 1], axis=0, return_inverse=True)
        partitions.append(Partition(labels.ravel()))

    return FilteredSpace(
        weights / weights.sum(),
        np.linspace(0.0, horizon, len(branching) + 1),
        partitions,
        paths[:, 1:],
        marks=marks,
    )


class L0Value(Atom):
    """Random vector of dimension d over the atoms of a finite space."""

    #: Space the value is defined on.
    space = Typed(FilteredSpace)

    #: One vector per atom, shape (n_atoms, d).
    values = Typed(np.ndarray)

    #: Cached measurability index, -1 until computed.
    _meas = Int(-1)

    def __init__(self, space: FilteredSpace, values, meas: int | None = None) -> None:
        array = np.array(values, dtype=float, copy=True)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2 or array.shape[0] != space.n_atoms:
            raise DimensionError(
                f"Expected values of shape ({space.n_atoms}, d), got {np.shape(values)}"
            )
        if not np.all(np.isfinite(array)):
            raise ValueError("L0 values must be finite")
        if meas is not None:
            partition = space.partition(meas)
            snapped = array[partition.representatives]
            scale = max(1.0, float(np.max(np.abs(array), initial=0.0)))
            if not np.allclose(array, snapped, rtol=0.0, atol=1e-12 * scale):
                raise MeasurabilityError(
                    f"Values are not constant on the blocks of partition {meas}"
                )
            array = snapped
        array.flags.writeable = False
        super().__init__(space=space, values=array)
        if meas is not None:
            self._meas = self._coarsest()

    @classmethod
    def constant(cls, space: FilteredSpace, value, dim: int = 1) -> "L0Value":
        vector = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
        return cls(space, np.tile(vector, (space.n_atoms, 1)))

    @classmethod
    def from_blocks(
        cls, space: FilteredSpace, per_block, sigma: PartitionLike = 0
    ) -> "L0Value":
        """Value constant on the blocks of sigma, one entry (or vector) per block.

        A single number is broadcast to every block.

        """
        partition = space.partition(sigma)
        table = np.asarray(per_block, dtype=float)
        if table.ndim == 0:
            table = np.full(partition.n_blocks, float(table))
        if table.shape[0] != partition.n_blocks:
            raise DimensionError(
                f"Expected {partition.n_blocks} block values, got {table.shape[0]}"
            )
        return cls(space, table[partition.labels])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def meas(self) -> int:
        """Index of the coarsest grid partition the value is constant on."""
        if self._meas < 0:
            self._meas = self._coarsest()
        return self._meas

    @property
    def scalar(self) -> np.ndarray:
        """Per atom values of a scalar (d = 1) value."""
        if self.dim != 1:
            raise DimensionError(f"Expected a scalar value, got dimension {self.dim}")
        return self.values[:, 0]

    def _coarsest(self) -> int:
        for k, partition in enumerate(self.space.partitions):
            if np.array_equal(self.values, self.values[partition.representatives]):
                return k
        raise MeasurabilityError(
            "Value is not measurable w.r.t. the finest partition of its space"
        )

    def norm(self) -> "L0Value":
        """Pointwise Euclidean norm."""
        return L0Value(self.space, np.linalg.norm(self.values, axis=1))

    def _operand(self, other):
        if isinstance(other, L0Value):
            if other.space is not self.space:
                raise DimensionError("Values live on different spaces")
            if other.dim not in (1, self.dim) and self.dim != 1:
                raise DimensionError(
                    f"Incompatible dimensions {self.dim} and {other.dim}"
                )
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return L0Value(self.space, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other):
        return L0Value(self.space, self.values - self._operand(other))

    def __rsub__(self, other):
        return L0Value(self.space, self._operand(other) - self.values)

    def __mul__(self, other):
        return L0Value(self.space, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return L0Value(self.space, self.values / self._operand(other))

    def __neg__(self):
        return L0Value(self.space, -self.values)

    def __repr__(self) -> str:
        return f"L0Value(dim={self.dim}, values={self.values.tolist()})"


def is_measurable(x: L0Value, sigma: PartitionLike) -> bool:
    """Whether x is constant on every block of sigma (exact equality)."""
    partition = x.space.partition(sigma)
    return bool(np.array_equal(x.values, x.values[partition.representatives]))


def block_average(space: FilteredSpace, values: np.ndarray, sigma: PartitionLike):
    """Weighted block averages of per atom values, broadcast back to the atoms.

    Works on arrays of shape (n_atoms, ...) and is the numerical kernel of
    :func:`cond_expect`.

    """
    partition = space.partition(sigma)
    values = np.asarray(values, dtype=float)
    flat = values.reshape(values.shape[0], -1)
    weights = space.weights
    totals = np.bincount(partition.labels, weights=weights, minlength=partition.n_blocks)
    sums = np.stack(
        [
            np.bincount(
                partition.labels,
                weights=weights * flat[:, j],
                minlength=partition.n_blocks,
            )
            for j in range(flat.shape[1])
        ],
        axis=1,
    )
    means = sums / totals[:, None]
    return means[partition.labels].reshape(values.shape)


def block_max(space: FilteredSpace, values: np.ndarray, sigma: PartitionLike):
    """Block-wise maximum of per atom scalars, broadcast back to the atoms."""
    partition = space.partition(sigma)
    maxima = np.full(partition.n_blocks, -np.inf)
    np.maximum.at(maxima, partition.labels, np.asarray(values, dtype=float))
    return maxima[partition.labels]


def block_min(space: FilteredSpace, values: np.ndarray, sigma: PartitionLike):
    """Block-wise minimum of per atom scalars, broadcast back to the atoms."""
    return -block_max(space, -np.asarray(values, dtype=float), sigma)


def cond_expect(x: L0Value, sigma: PartitionLike) -> L0Value:
    """Conditional expectation of x given the sigma-algebra generated by sigma.

    Raises
    ------
    PartitionError
        If sigma is not compatible with the space of x.

    """
    partition = x.space.partition(sigma)
    if is_measurable(x, partition):
        return x
    return L0Value(x.space, block_average(x.space, x.values, partition))


def random_value(
    space: FilteredSpace,
    rng: np.random.Generator,
    *,
    meas: PartitionLike | None = None,
    dim: int = 1,
    scale: float = 1.0,
) -> L0Value:
    """Gaussian random value, optionally measurable w.r.t. a given partition."""
    values = rng.normal(scale=scale, size=(space.n_atoms, dim))
    if meas is not None:
        values = values[space.partition(meas).representatives]
    return L0Value(space, values)


def random_space(
    rng: np.random.Generator,
    *,
    max_atoms: int = 24,
    min_steps: int = 1,
    max_steps: int = 3,
    base_blocks: Sequence[int] = (1, 2, 3),
    max_branching: int = 3,
    uniform: bool = False,
) -> FilteredSpace:
    """Random tree with at most max_atoms atoms and random edge probabilities."""
    while True:
        base = int(rng.choice(base_blocks))
        n_steps = int(rng.integers(min_steps, max_steps + 1))
        branching = [int(b) for b in rng.integers(1, max_branching + 1, size=n_steps)]
        if base * int(np.prod(branching)) <= max_atoms:
            break
    probabilities = None
    if not uniform:
        probabilities = [rng.dirichlet(np.full(b, 2.0)) for b in branching]
        probabilities = [p / p.sum() for p in probabilities]
    return build_space(branching, probabilities, base_branching=base)
