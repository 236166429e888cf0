# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Backward stochastic equations Y_t + F_t(Y, M) + M_t = xi + F_T(Y, M) + M_T.

Solutions are in one to one correspondence with the fixed points of
G(V) = xi + F_T(Y^V, M^V), where M^V = E_0(V) - E_.(V) and Y^V solves the
forward equation Y_t = E_0(V) - F_t(Y, M^V) - M^V_t (condition (S)).

"""

import logging
import math
from collections.abc import Callable, Sequence
from typing import Any, TypeVar

import numpy as np
from atom.api import Atom, Float, Typed

from .errors import DimensionError, MeasurabilityError, ParameterError
from .l0algebra import (
    EventPartition,
    glue,
    random_event_partition,
    raw_values,
    relative_gap,
    stability_check,
)
from .probspace import (
    FilteredSpace,
    L0Value,
    PartitionLike,
    block_average,
    cond_expect,
    is_measurable,
)
from .processes import (
    AdaptedProcess,
    Decomposition,
    MartingaleProcess,
    conditional_expectations,
    martingale_from_terminal,
    random_martingale,
    random_process,
)
from .reporting import CheckReport
from .rnmodule import CondNorm, RandomIterCount, fixed_point_random_contraction

logger = logging.getLogger(__name__)

#: Generator kinds by catalog name.
GENERATOR_KINDS: dict[str, type["GeneratorSpec"]] = {}

K = TypeVar("K", bound="GeneratorSpec")


def register_kind(cls: type[K]) -> type[K]:
    """Class decorator adding a generator to the catalog under its kind."""
    GENERATOR_KINDS[cls.kind] = cls
    return cls


def base_parameter(
    space: FilteredSpace, value: Any, name: str, *, nonnegative: bool = False
) -> L0Value:
    """Coerce a number, a per base block list or a per atom list to a parameter.

    Raises
    ------
    MeasurabilityError
        If the parameter is not constant on the blocks of partitions[0].
    ParameterError
        If a non negative parameter takes a negative value.

    """
    if isinstance(value, L0Value):
        if value.space is not space or value.dim != 1:
            raise DimensionError(f"{name} must be a scalar value on the generator space")
        parameter = value
    else:
        array = np.asarray(value, dtype=float)
        if array.ndim == 0 or array.shape == (space.base.n_blocks,):
            parameter = L0Value.from_blocks(space, array, 0)
        elif array.shape == (space.n_atoms,):
            parameter = L0Value(space, array)
        else:
            raise DimensionError(
                f"{name}: expected a number, {space.base.n_blocks} block values or "
                f"{space.n_atoms} atom values, got shape {array.shape}"
            )
    if not is_measurable(parameter, 0):
        raise MeasurabilityError(f"{name} must be measurable w.r.t. partition 0")
    if nonnegative and np.any(parameter.scalar < 0):
        raise ParameterError(f"{name} must be non negative, got {parameter.scalar.min()}")
    return parameter


class GeneratorSpec(Atom):
    """Generator F of a backward stochastic equation, with F_0 = 0.

    Subclasses define ``values`` and may precompute martingale dependent
    quantities (a decomposition, a norm) once per martingale in ``prepare``.

    """

    #: Catalog name.
    kind = "generator"

    #: Space the generator acts on.
    space = Typed(FilteredSpace)

    @property
    def y_independent(self) -> bool:
        """Whether F(Y, M) only depends on M."""
        return False

    def prepare(self, M: MartingaleProcess) -> Any:
        return None

    def values(self, Y: AdaptedProcess, M: MartingaleProcess, prepared: Any) -> np.ndarray:
        """Values of F(Y, M) on the grid, shape (N + 1, n_atoms, d)."""
        raise NotImplementedError

    def parameters(self) -> dict[str, Any]:
        """Parameters as per base block lists, for reports."""
        leaders = self.space.base.leaders
        described: dict[str, Any] = {"kind": self.kind}
        for name in sorted(self.members()):
            value = getattr(self, name)
            if isinstance(value, L0Value):
                described[name] = [float(v) for v in value.scalar[leaders]]
            elif isinstance(value, (int, float, str)) and not name.startswith("_"):
                described[name] = value
        return described

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.parameters()})"


class LeftSumGenerator(GeneratorSpec):
    """Integral generator F_{t_k} = sum_{j<k} f(t_j, ...) dt."""

    def integrand(
        self, k: int, Y: AdaptedProcess, M: MartingaleProcess, prepared: Any
    ) -> np.ndarray:
        """Driver on step k, shape (n_atoms, d)."""
        raise NotImplementedError

    def values(self, Y, M, prepared):
        space = self.space
        out = np.zeros((space.n_steps + 1, space.n_atoms, M.dim))
        for k in range(space.n_steps):
            out[k + 1] = out[k] + self.integrand(k, Y, M, prepared) * space.dt
        return out


def _check_spaces(F: GeneratorSpec, *elements: Any) -> None:
    for element in elements:
        if element.space is not F.space:
            raise DimensionError("The generator and its arguments live on different spaces")


def eval_generator(
    F: GeneratorSpec, Y: AdaptedProcess, M: MartingaleProcess, prepared: Any = None
) -> AdaptedProcess:
    """F(Y, M) as an adapted process vanishing at t_0."""
    _check_spaces(F, Y, M)
    if prepared is None:
        prepared = F.prepare(M)
    values = F.values(Y, M, prepared)
    if np.any(values[0]):
        raise ParameterError(f"Generator {F.kind!r} does not vanish at the initial time")
    return AdaptedProcess(F.space, values, label="F")


class BseSolution(Atom):
    """Candidate solution (Y, M) of a backward stochastic equation."""

    Y = Typed(AdaptedProcess)

    M = Typed(MartingaleProcess)

    #: Largest per atom residual of the equation, nan until measured.
    residual = Float(math.nan)

    #: Decomposition of M along the basis drivers, when computed.
    decomposition = Typed(Decomposition)

    @property
    def space(self) -> FilteredSpace:
        return self.Y.space

    def pair(self) -> tuple[AdaptedProcess, MartingaleProcess]:
        return self.Y, self.M


@glue.register
def _(element: BseSolution, masks, elements) -> BseSolution:
    return BseSolution(
        Y=glue(element.Y, masks, [e.Y for e in elements]),
        M=glue(element.M, masks, [e.M for e in elements]),
    )


@raw_values.register
def _(element: BseSolution) -> np.ndarray:
    return np.concatenate([element.Y.values.reshape(-1), element.M.values.reshape(-1)])


def solve_condition_S(  # noqa: N802
    F: GeneratorSpec,
    y: L0Value,
    M: MartingaleProcess,
    tol: float,
    *,
    prepared: Any = None,
    max_iter: int = 100,
    factor: float = 0.5,
) -> AdaptedProcess:
    """Solve Y_t = y - F_t(Y, M) - M_t by Picard iteration.

    The iteration runs through the random contraction engine with the
    iteration count N + 1: with left endpoint sums F_{t_k} only depends on Y
    before t_k so that N + 1 steps of the recursion reach the solution. The
    declared factor is only used to monitor the observed ratios.

    Raises
    ------
    MeasurabilityError
        If y is not measurable w.r.t. partitions[0].
    ConvergenceError
        If the iteration does not settle within max_iter applications.

    """
    _check_spaces(F, y, M)
    if not is_measurable(y, 0):
        raise MeasurabilityError("The initial value must be measurable w.r.t. partition 0")
    space = F.space
    if prepared is None:
        prepared = F.prepare(M)
    shift = y.values[None] - M.values

    def step(Y: AdaptedProcess) -> AdaptedProcess:
        return AdaptedProcess(space, shift - F.values(Y, M, prepared))

    depth = 1 if F.y_independent else space.n_steps + 1
    Y, _ = fixed_point_random_contraction(
        step,
        RandomIterCount(space, depth),
        L0Value.constant(space, factor),
        AdaptedProcess(space, shift),
        CondNorm(space, math.inf),
        tol,
        max_iter,
        label="condition (S)",
        log_level=logging.DEBUG,
    )
    return Y


def _phi(
    F: GeneratorSpec, V: L0Value, tol: float
) -> tuple[AdaptedProcess, MartingaleProcess, Any]:
    _check_spaces(F, V)
    M = martingale_from_terminal(V)
    prepared = F.prepare(M)
    Y = solve_condition_S(F, cond_expect(V, 0), M, tol, prepared=prepared)
    return Y, M, prepared


def G_map(F: GeneratorSpec, xi: L0Value, V: L0Value, tol: float) -> L0Value:  # noqa: N802
    """G(V) = xi + F_T(Y^V, M^V)."""
    Y, M, prepared = _phi(F, V, tol)
    return xi + F.values(Y, M, prepared)[-1]


def phi(F: GeneratorSpec, V: L0Value, tol: float) -> BseSolution:
    """The pair (Y^V, M^V) attached to a terminal candidate V."""
    Y, M, _ = _phi(F, V, tol)
    return BseSolution(Y=Y, M=M)


def pi(Y: AdaptedProcess, M: MartingaleProcess) -> L0Value:
    """pi(Y, M) = Y_0 - M_T, inverse of phi on the fixed points of G."""
    return Y.initial - M.terminal


def bse_residual(F: GeneratorSpec, xi: L0Value, solution: BseSolution) -> L0Value:
    """Per atom max over the grid of |Y_t + F_t + M_t - xi - F_T - M_T|."""
    Y, M = solution.pair()
    values = eval_generator(F, Y, M).values
    lhs = Y.values + values + M.values
    rhs = xi.values + values[-1] + M.values[-1]
    return L0Value(F.space, np.max(np.linalg.norm(lhs - rhs[None], axis=2), axis=0))


def G0_map(F: GeneratorSpec, xi: L0Value, V: L0Value, tol: float) -> L0Value:  # noqa: N802
    """G_0(V) = G(V) - E_0(G(V)) on the terminal values with E_0(V) = 0.

    Raises
    ------
    ParameterError
        If F depends on Y or E_0(V) does not vanish.

    """
    if not F.y_independent:
        raise ParameterError(f"Generator {F.kind!r} depends on Y")
    mean = block_average(F.space, V.values, 0)
    scale = max(1.0, float(np.max(np.abs(V.values))))
    if np.max(np.abs(mean)) > 1e-12 * scale:
        raise ParameterError("G_0 is only defined for terminal values with E_0(V) = 0")
    value = G_map(F, xi, V, tol)
    return value - cond_expect(value, 0)


def G0_fixed_point_check(  # noqa: N802
    F: GeneratorSpec,
    xi: L0Value,
    solution: BseSolution,
    tol: float,
    *,
    tolerance: float = 1e-8,
) -> CheckReport:
    """Check the zero mean fixed point description of a Y independent solution.

    V = -M_T is a fixed point of G_0, M_t = -E_t(V) and
    Y_t = E_0(xi) + E_0(F_T(M)) - F_t(M) - M_t.

    """
    Y, M = solution.pair()
    V = -M.terminal
    report = CheckReport(name="G0 fixed point", tolerance=tolerance)
    report.check(relative_gap(G0_map(F, xi, V, tol), V), "fixed point")
    rebuilt_M = -conditional_expectations(V)
    report.check(relative_gap(M.values, rebuilt_M), "martingale")
    values = eval_generator(F, AdaptedProcess.zeros(F.space, M.dim), M).values
    constant = block_average(F.space, xi.values + values[-1], 0)
    rebuilt_Y = constant[None] - values - M.values
    report.check(relative_gap(Y.values, rebuilt_Y), "value process")
    return report


def iterate_generator(
    F: GeneratorSpec, Y: AdaptedProcess, M: MartingaleProcess, counts: RandomIterCount
) -> AdaptedProcess:
    """F^(L)(Y, M) = F(Y^(L), M), Y^(1) = Y and Y^(k) = Y_0 - F(Y^(k-1), M) - M."""
    _check_spaces(F, Y, M)
    prepared = F.prepare(M)
    shift = Y.values[0][None] - M.values
    current = Y
    outputs = []
    for k in range(counts.maximum):
        if k:
            current = AdaptedProcess(F.space, shift - outputs[-1])
        outputs.append(F.values(current, M, prepared))
    processes = [AdaptedProcess(F.space, v, label="F") for v in outputs]
    masks = [counts.values == k for k in range(1, counts.maximum + 1)]
    return glue(processes[0], masks, processes)


def iterate_bound_check(
    F: GeneratorSpec,
    counts: RandomIterCount,
    C: L0Value,
    p: float,
    samples: Sequence[tuple[tuple[AdaptedProcess, MartingaleProcess], ...]],
    *,
    base: PartitionLike = 0,
    tolerance: float = 1e-10,
) -> CheckReport:
    """Sampled check of |||F^(L)(Y,M) - F^(L)(Y',M')||| <= C (|||Y-Y'||| + |||M-M'|||)."""
    norm = CondNorm(F.space, p, base)
    report = CheckReport(name=f"iterate bound {F.kind}", tolerance=tolerance)
    for i, ((Y, M), (Yp, Mp)) in enumerate(samples):
        lhs = norm(iterate_generator(F, Y, M, counts) - iterate_generator(F, Yp, Mp, counts))
        rhs = C * (norm(Y - Yp) + norm(M - Mp))
        scale = max(1.0, float(np.max(rhs.scalar)))
        report.check(max(0.0, float(np.max((lhs - rhs).scalar))) / scale, f"pair {i}")
    return report


def random_pair(
    space: FilteredSpace, rng: np.random.Generator, dim: int = 1, scale: float = 1.0
) -> tuple[AdaptedProcess, MartingaleProcess]:
    return random_process(space, rng, dim, scale), random_martingale(space, rng, dim, scale)


def random_stability_samples(
    space: FilteredSpace, rng: np.random.Generator, count: int, dim: int = 1
) -> list[tuple[EventPartition, list[tuple[AdaptedProcess, MartingaleProcess]]]]:
    """Random partitions of partition 0 into events, with one random pair per event."""
    samples = []
    for _ in range(count):
        partition = random_event_partition(
            space, rng, n_blocks=min(3, space.base.n_blocks)
        )
        samples.append(
            (partition, [random_pair(space, rng, dim) for _ in range(partition.n_blocks)])
        )
    return samples


def generator_stability_check(
    F: GeneratorSpec,
    samples: Sequence[tuple[EventPartition, Sequence[tuple[AdaptedProcess, MartingaleProcess]]]],
    *,
    xi: L0Value | None = None,
    tol: float = 1e-11,
    tolerance: float = 1e-10,
) -> CheckReport:
    """Check that F, and G when xi is given, commute with concatenation.

    The terminal candidates used for G are the images pi(Y, M) of the sampled
    pairs.

    """

    def evaluate(pair: tuple[AdaptedProcess, MartingaleProcess]) -> AdaptedProcess:
        return eval_generator(F, *pair)

    report = stability_check(
        evaluate, samples, tolerance=tolerance, name=f"stability {F.kind}"
    )
    if xi is not None:
        terminal = [
            (partition, [pi(Y, M) for Y, M in pairs]) for partition, pairs in samples
        ]
        report.merge(
            stability_check(
                lambda V: G_map(F, xi, V, tol), terminal, tolerance=tolerance
            )
        )
    return report


def mapping_of(F: GeneratorSpec, xi: L0Value, tol: float) -> Callable[[L0Value], L0Value]:
    """The G map of (F, xi) as a one argument callable."""

    def mapping(V: L0Value) -> L0Value:
        return G_map(F, xi, V, tol)

    return mapping
