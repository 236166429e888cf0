# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Conditional norms, the random contraction engine and normal structure witnesses."""

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from functools import singledispatch
from typing import Any, TypeVar

import numpy as np
from atom.api import Atom, Float, Typed

from .errors import (
    ConvergenceError,
    DimensionError,
    MeasurabilityError,
    ParameterError,
    PropertyError,
)
from .l0algebra import glue, l0_sup, stable_sup_witness
from .probspace import (
    FilteredSpace,
    L0Value,
    Partition,
    PartitionLike,
    block_average,
    block_max,
)
from .reporting import CheckReport, SolveReport

logger = logging.getLogger(__name__)

E = TypeVar("E")


class CondNorm(Atom):
    """Conditional L^p norm (E[|x|^p | base])^(1/p), p in (1, inf]."""

    #: Space of the normed elements.
    space = Typed(FilteredSpace)

    #: Exponent, math.inf for the conditional essential supremum.
    p = Float()

    #: Partition generating the conditioning sigma-algebra.
    base = Typed(Partition)

    def __init__(self, space: FilteredSpace, p: float = 2.0, base: PartitionLike = 0):
        p = float(p)
        if not p > 1.0:
            raise ParameterError(f"The exponent p must be > 1, got {p}")
        super().__init__(space=space, p=p, base=space.partition(base))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.p)

    def reduce(self, magnitudes: np.ndarray) -> np.ndarray:
        """Conditional norm of per atom non negative magnitudes."""
        if self.is_infinite:
            return block_max(self.space, magnitudes, self.base)
        averaged = block_average(self.space, np.power(magnitudes, self.p), self.base)
        return np.power(averaged, 1.0 / self.p)

    def blocks(self, value: L0Value) -> np.ndarray:
        """One entry per base block of a base measurable scalar."""
        return value.scalar[self.base.leaders]

    def __call__(self, x: Any) -> L0Value:
        return cond_norm(x, self)


@singledispatch
def cond_norm(x: Any, norm: CondNorm) -> L0Value:
    """Conditional norm of an element of a random normed module.

    L0 values use the Euclidean norm of R^d inside the conditional L^p norm;
    processes use the running maximum over the grid first; pairs use the sum of
    the norms of their members.

    """
    raise TypeError(f"No conditional norm for {type(x).__name__}")


@cond_norm.register
def _(x: L0Value, norm: CondNorm) -> L0Value:
    if x.space is not norm.space:
        raise DimensionError("The value and the norm live on different spaces")
    return L0Value(norm.space, norm.reduce(np.linalg.norm(x.values, axis=1)))


@cond_norm.register
def _(x: tuple, norm: CondNorm) -> L0Value:
    total = cond_norm(x[0], norm)
    for member in x[1:]:
        total = total + cond_norm(member, norm)
    return total


def cond_inner(x: L0Value, y: L0Value, base: PartitionLike = 0) -> L0Value:
    """Conditional inner product E[x . y | base]."""
    if x.space is not y.space or x.dim != y.dim:
        raise DimensionError("Inner product of values of different shapes")
    products = np.sum(x.values * y.values, axis=1)
    return L0Value(x.space, block_average(x.space, products, base))


def rnm_axiom_check(
    norm: CondNorm,
    samples: Sequence[tuple[L0Value, L0Value, L0Value]],
    *,
    tolerance: float = 1e-10,
) -> CheckReport:
    """Check the three random normed module axioms on sampled triples.

    Each sample is (x, y, xi) with xi a base measurable scalar. The first axiom
    is exercised on x restricted to the event {xi > 0}, whose norm vanishes
    exactly off the event.

    """
    report = CheckReport(name="random norm axioms", tolerance=tolerance)
    for i, (x, y, xi) in enumerate(samples):
        restricted = x * (xi.scalar > 0).astype(float)[:, None]
        null = norm(restricted).scalar == 0.0
        report.check(
            float(np.max(np.abs(restricted.values[null]), initial=0.0)), f"null norm {i}"
        )
        lhs = norm(xi * x).scalar
        rhs = np.abs(xi.scalar) * norm(x).scalar
        scale = max(1.0, float(np.max(np.abs(rhs))))
        report.check(float(np.max(np.abs(lhs - rhs))) / scale, f"homogeneity {i}")
        nx, ny = norm(x).scalar, norm(y).scalar
        excess = norm(x + y).scalar - nx - ny
        scale = max(1.0, float(np.max(nx + ny)))
        report.check(max(0.0, float(np.max(excess))) / scale, f"triangle {i}")
    return report


class RandomIterCount(Atom):
    """Positive integer valued random variable measurable w.r.t. a base partition."""

    space = Typed(FilteredSpace)

    #: Iteration count of every atom.
    values = Typed(np.ndarray)

    base = Typed(Partition)

    def __init__(self, space: FilteredSpace, values, base: PartitionLike = 0) -> None:
        partition = space.partition(base)
        counts = np.asarray(values)
        if counts.ndim == 0:
            counts = np.full(space.n_atoms, counts)
        if counts.shape != (space.n_atoms,):
            raise DimensionError(
                f"Expected {space.n_atoms} iteration counts, got {counts.shape}"
            )
        if np.any(counts != np.round(counts)) or np.any(counts < 1):
            raise ParameterError("Iteration counts must be integers >= 1")
        counts = counts.astype(np.int64)
        if not np.array_equal(counts, counts[partition.representatives]):
            raise MeasurabilityError(
                "Iteration counts must be constant on the blocks of the base partition"
            )
        counts.flags.writeable = False
        super().__init__(space=space, values=counts, base=partition)

    @classmethod
    def from_blocks(
        cls, space: FilteredSpace, per_block: Sequence[int], base: PartitionLike = 0
    ) -> "RandomIterCount":
        partition = space.partition(base)
        table = np.asarray(per_block)
        if table.shape != (partition.n_blocks,):
            raise DimensionError(
                f"Expected {partition.n_blocks} block counts, got {table.shape}"
            )
        return cls(space, table[partition.labels], partition)

    def per_block(self) -> list[int]:
        return [int(v) for v in self.values[self.base.leaders]]

    @property
    def maximum(self) -> int:
        return int(self.values.max())


def iterate_random(mapping: Callable[[E], E], counts: RandomIterCount, x: E) -> E:
    """T^(L)(x): on {L = k} the k-th iterate of the mapping."""
    largest = counts.maximum
    iterates = [x]
    for _ in range(largest):
        iterates.append(mapping(iterates[-1]))
    if largest == int(counts.values.min()):
        return iterates[-1]
    masks = [counts.values == k for k in range(1, largest + 1)]
    return glue(iterates[1], masks, iterates[1:])


def fixed_point_random_contraction(
    mapping: Callable[[E], E],
    counts: RandomIterCount,
    xi: L0Value,
    x0: E,
    norm: CondNorm,
    tol: float,
    max_outer: int = 1000,
    *,
    trace: bool = False,
    slack: float = 1e-9,
    label: str = "fixed point",
    log_level: int = logging.INFO,
) -> tuple[E, SolveReport]:
    """Fixed point of a stable random contraction by iterating T^(L).

    Parameters
    ----------
    mapping : Callable
        Stable self map T of the module.
    counts : RandomIterCount
        Random iteration count L.
    xi : L0Value
        Declared contraction factor of T^(L), < 1 on every atom. Only used to
        monitor the observed ratios.
    x0 : element
        Starting point.
    norm : CondNorm
        Conditional norm measuring steps and residuals.
    tol : float
        Convergence threshold on cond_norm(T(x) - x), per base block.
    max_outer : int, optional
        Maximal number of applications of T^(L).
    trace : bool, optional
        Keep every iterate in the report.
    slack : float, optional
        Margin above the declared factor before an observed ratio is flagged.
    label : str, optional
        Name used in logs and in the report.
    log_level : int, optional
        Level of the convergence record.

    Returns
    -------
    tuple[element, SolveReport]
        The fixed point and the iteration report.

    Raises
    ------
    ParameterError
        If tol is not positive or xi is not < 1 on every atom.
    ConvergenceError
        If max_outer is exceeded or the iteration diverges. The report is
        attached to the exception.

    """
    if not tol > 0:
        raise ParameterError(f"The tolerance must be positive, got {tol}")
    if xi.dim != 1 or np.any(xi.scalar >= 1.0) or np.any(xi.scalar < 0.0):
        raise ParameterError("The contraction factor must lie in [0, 1) on every atom")
    bounds = block_max(norm.space, xi.scalar, norm.base)[norm.base.leaders]
    report = SolveReport(
        label=label,
        status="running",
        bounds=[float(b) for b in bounds],
        iteration_counts=[
            int(c) for c in block_max(norm.space, counts.values, norm.base)[norm.base.leaders]
        ],
    )
    floor = 10.0 * tol
    flagged: set[int] = set()
    previous: np.ndarray | None = None
    first_step: float | None = None
    x = x0
    for outer in range(1, max_outer + 1):
        new = iterate_random(mapping, counts, x)
        step = norm.blocks(norm(new - x))
        x = new
        if trace:
            report.trace.append(x)
        if previous is not None:
            row: list[float | None] = []
            for b, (now, before) in enumerate(zip(step, previous)):
                if before <= floor:
                    row.append(None)
                    continue
                ratio = float(now / before)
                row.append(ratio)
                if ratio > bounds[b] + slack and b not in flagged:
                    flagged.add(b)
                    message = (
                        f"iteration {outer}: block {b} ratio {ratio:.4f} exceeds "
                        f"the contraction bound {bounds[b]:.4f}"
                    )
                    report.flags.append(message)
                    logger.warning("%s: %s", label, message)
            report.ratios.append(row)
        worst = float(np.max(step))
        report.residuals.append(worst)
        report.iterations = outer
        logger.debug("%s: iteration %d, worst step %.3e", label, outer, worst)
        if first_step is None:
            first_step = max(worst, tol)
        if not math.isfinite(worst) or (outer > 5 and worst > 1e12 * first_step):
            report.status = "diverged"
            raise ConvergenceError(f"{label}: iteration diverged at step {outer}", report)
        previous = step
        if worst <= tol:
            residual = norm.blocks(norm(mapping(x) - x))
            if float(np.max(residual)) <= tol:
                report.block_residuals = [float(r) for r in residual]
                report.status = "converged"
                logger.log(log_level, "%s: converged after %d iterations", label, outer)
                return x, report
    report.status = "max_iter"
    raise ConvergenceError(
        f"{label}: no convergence within {max_outer} iterations "
        f"(last step {report.residuals[-1]:.3e}, tolerance {tol:.1e})",
        report,
    )


def random_diameter(
    generators: Sequence[L0Value], norm: CondNorm | None = None
) -> L0Value:
    """Random diameter of the L0-convex hull of finitely many generators.

    Without a norm the module is L0(F, R^d) with the pointwise Euclidean norm;
    with a conditional norm the diameter is measured in that norm. In both
    cases the hull diameter is reached on a pair of generators.

    """
    if not generators:
        raise ParameterError("At least one generator is required")
    space = generators[0].space
    distances = [np.zeros(space.n_atoms)]
    for a, b in itertools.combinations(generators, 2):
        difference = a - b
        if norm is None:
            distances.append(np.linalg.norm(difference.values, axis=1))
        else:
            distances.append(cond_norm(difference, norm).scalar)
    return L0Value(space, np.max(distances, axis=0))


def nondiametral_midpoint(
    generators: Sequence[L0Value],
    norm: CondNorm,
    *,
    report: CheckReport | None = None,
    label: str = "",
) -> tuple[L0Value, L0Value]:
    """Nondiametral point of the L0-convex hull of the generators.

    Selects, block by block, a pair of generators at maximal distance (ties to
    the lexicographically smallest pair), glues the selections and returns
    their midpoint z together with the margin D(H) - sup_h |||z - h|||.
    A margin that is not positive on a block of positive diameter is recorded
    in report when given.

    Raises
    ------
    ParameterError
        If p is infinite or the random diameter vanishes everywhere.
    PropertyError
        If no report is given and the margin is not positive on such a block.

    """
    if norm.is_infinite:
        raise ParameterError("Normal structure witnesses need p in (1, inf)")
    if len(generators) < 2:
        raise ParameterError("At least two generators are required")
    diameter = random_diameter(generators, norm)
    positive = diameter.scalar > 0
    if not np.any(positive):
        raise ParameterError("The random diameter vanishes on every block")
    pairs = list(itertools.combinations(range(len(generators)), 2))
    distances = [cond_norm(generators[i] - generators[j], norm) for i, j in pairs]
    eps = L0Value(norm.space, np.where(positive, diameter.scalar / 2.0, 1.0))
    selection, _ = stable_sup_witness(distances, eps)
    masks = [selection == n for n in range(len(pairs))]
    x = glue(generators[0], masks, [generators[i] for i, _ in pairs])
    y = glue(generators[0], masks, [generators[j] for _, j in pairs])
    z = (x + y) * 0.5
    farthest = l0_sup([cond_norm(z - h, norm) for h in generators])
    margin = diameter - farthest
    worst = float(np.min(margin.scalar[positive]))
    strict = report is None
    if strict:
        report = CheckReport(name="normal-structure", tolerance=0.0)
    if not report.check(0.0 if worst > 0 else max(-worst, 1e-300), label):
        logger.warning("Midpoint is diametral on some block, margin %s", margin.scalar)
        if strict:
            raise PropertyError(
                f"Midpoint is diametral on some block (margin {worst:.3e})", report
            )
    return z, margin


def normal_structure_check(
    families: Sequence[Sequence[L0Value]], norm: CondNorm
) -> CheckReport:
    """Check that every family admits a nondiametral midpoint (margin > 0)."""
    report = CheckReport(name="normal-structure", tolerance=0.0)
    for i, family in enumerate(families):
        nondiametral_midpoint(family, norm, report=report, label=f"family {i}")
    return report
