# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""End to end solvers of backward stochastic equations.

Contraction solvers iterate the G map with the random contraction engine,
the nonexpansive solver runs a Mann iteration, the concatenation solver glues
classical solves along the blocks of partitions[0] and the oracle performs a
plain backward induction used to cross check the others.

"""

import logging
import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from atom.api import Atom, Float, Typed

from .bsecore import (
    BseSolution,
    GeneratorSpec,
    base_parameter,
    bse_residual,
    generator_stability_check,
    iterate_bound_check,
    mapping_of,
    phi,
    pi,
    random_pair,
    random_stability_samples,
)
from .errors import (
    BudgetError,
    ConvergenceError,
    MeasurabilityError,
    ParameterError,
    PartitionError,
    SelfMapError,
)
from .generators import (
    DelayedGenerator,
    IntegralGenerator,
    MaskedGenerator,
    PathFunctionalGenerator,
    PointwiseGenerator,
)
from .l0algebra import concatenate
from .probspace import (
    L0Value,
    PartitionLike,
    block_average,
    block_max,
    is_measurable,
    random_value,
)
from .processes import (
    AdaptedProcess,
    MartingaleProcess,
    doob_constant,
    martingale_decompose,
    project_step,
)
from .reporting import CheckReport, SolveReport
from .rnmodule import CondNorm, RandomIterCount, fixed_point_random_contraction

logger = logging.getLogger(__name__)

#: Headroom above the theoretical outer factor before an observed ratio is flagged.
RATIO_SLACK = 0.05

#: Margin enforcing the strict admissibility inequalities.
STRICT_MARGIN = 1e-9

#: Largest random iteration count searched by the integral solver.
MAX_ITERATION_COUNT = 200

#: Agreement required between glued and direct solutions.
AGREEMENT_TOLERANCE = 1e-8


def threshold_constant(p: float) -> float:
    """c_2 = 1/5, c_inf = 1/4 and c_p = (p - 1) / (4p - 1) otherwise."""
    doob_constant(p)
    if math.isinf(p):
        return 0.25
    if p == 2.0:
        return 0.2
    return (p - 1.0) / (4.0 * p - 1.0)


def _first_block(space, violated: np.ndarray) -> int:
    return int(space.base.labels[int(np.argmax(violated))])


class ContractionBudget(Atom):
    """Contraction coefficient and random iteration count of a generator.

    The G map then contracts with the outer factor 4C/(1 - C) for p = 2 and
    3 C_p C/(1 - C) otherwise.

    """

    p = Float(2.0)

    #: Coefficient of the iterate bound, measurable w.r.t. partition 0.
    C = Typed(L0Value)

    #: Random iteration count L.
    counts = Typed(RandomIterCount)

    def __init__(
        self, space, C: Any, *, p: float = 2.0, counts: RandomIterCount | None = None
    ) -> None:
        p = float(p)
        coefficient = base_parameter(space, C, "C", nonnegative=True)
        limit = threshold_constant(p)
        violated = coefficient.scalar >= limit - STRICT_MARGIN
        if np.any(violated):
            block = _first_block(space, violated)
            value = float(coefficient.scalar[space.base.leaders[block]])
            raise BudgetError(
                f"Contraction coefficient {value} on base block {block} is not below "
                f"c_p = {limit}",
                block,
            )
        super().__init__(
            p=p,
            C=coefficient,
            counts=counts if counts is not None else RandomIterCount(space, 1),
        )

    @property
    def c_p(self) -> float:
        return threshold_constant(self.p)

    @property
    def factor(self) -> L0Value:
        C = self.C.scalar
        if self.p == 2.0:
            return L0Value(self.C.space, 4.0 * C / (1.0 - C))
        return L0Value(self.C.space, 3.0 * doob_constant(self.p) * C / (1.0 - C))


def _outer_tolerance(norm: CondNorm, tol: float) -> float:
    # A conditional p-norm below eps bounds the atom values by eps / w_min^(1/p).
    if norm.is_infinite:
        return 0.1 * tol
    weight = float(norm.space.conditional_weights(norm.base).min())
    return 0.1 * tol * weight ** (1.0 / norm.p)


def _finish(
    F: GeneratorSpec, xi: L0Value, solution: BseSolution, report: SolveReport, tol: float
) -> BseSolution:
    solution.residual = float(np.max(bse_residual(F, xi, solution).scalar))
    report.solution_residual = solution.residual
    if solution.residual > tol:
        message = f"solution residual {solution.residual:.3e} above tolerance {tol:.1e}"
        report.flags.append(message)
        logger.warning("%s: %s", report.label, message)
    return solution


def solve_bse_contraction(
    F: GeneratorSpec,
    xi: L0Value,
    budget: ContractionBudget,
    tol: float,
    max_iter: int = 1000,
    *,
    start: L0Value | None = None,
    base: PartitionLike = 0,
    rng: np.random.Generator | None = None,
    stability_samples: int = 2,
    trace: bool = False,
    label: str = "contraction",
) -> tuple[BseSolution, SolveReport]:
    """Solve the equation of F and xi by Picard iteration of G^(L).

    Parameters
    ----------
    F : GeneratorSpec
        Generator whose iterate bound is described by the budget.
    xi : L0Value
        Terminal condition.
    budget : ContractionBudget
        Declared coefficient and random iteration count.
    tol : float
        Largest admissible per atom residual of the equation.
    max_iter : int, optional
        Largest number of applications of G^(L).
    start : L0Value, optional
        Initial terminal candidate, xi by default.
    base : PartitionLike, optional
        Conditioning partition of the norms. The trivial partition gives the
        classical solve, coefficients and counts being lifted to their block
        maximum.
    rng : np.random.Generator, optional
        Source of the stability samples.
    stability_samples : int, optional
        Number of sampled concatenations checked before solving.
    trace : bool, optional
        Keep the iterates in the report.
    label : str, optional
        Name used in logs and reports.

    Raises
    ------
    ParameterError
        If the generator fails the sampled stability check.
    ConvergenceError
        If the iteration does not converge.

    """
    space = F.space
    norm = CondNorm(space, budget.p, base)
    factor = L0Value(space, block_max(space, budget.factor.scalar, norm.base))
    counts = RandomIterCount(
        space, block_max(space, budget.counts.values, norm.base), norm.base
    )
    if stability_samples and space.base.n_blocks > 1:
        rng = rng if rng is not None else np.random.default_rng(0)
        samples = random_stability_samples(space, rng, stability_samples, xi.dim)
        check = generator_stability_check(F, samples)
        if not check.passed:
            raise ParameterError(
                f"Generator {F.kind!r} is not stable: {check.violations[0]}"
            )
    outer = _outer_tolerance(norm, tol)
    inner = outer / 10.0
    logger.info("%s: iteration counts per block %s", label, counts.per_block())
    V, report = fixed_point_random_contraction(
        mapping_of(F, xi, inner),
        counts,
        factor,
        xi if start is None else start,
        norm,
        outer,
        max_iter,
        trace=trace,
        slack=RATIO_SLACK,
        label=label,
    )
    report.extras["p"] = budget.p
    report.extras["c_p"] = budget.c_p
    report.extras["coefficients"] = [
        float(c) for c in block_max(space, budget.C.scalar, norm.base)[norm.base.leaders]
    ]
    solution = _finish(F, xi, phi(F, V, inner), report, tol)
    return solution, report


def integral_iteration_counts(
    F: IntegralGenerator, p: float
) -> tuple[RandomIterCount, L0Value]:
    """Smallest k with B_k = 2 (C1 T)^k / k! + (e^(C1 T) - 1) C2 / C1 < c_p.

    Returns
    -------
    counts : RandomIterCount
        The random iteration count L.
    coefficient : L0Value
        B_L, the coefficient of the iterate bound of F^(L).

    Raises
    ------
    BudgetError
        If C2 (e^(C1 T) - 1) / C1 < c_p fails on some base block or no count
        below the search cap is admissible.

    """
    space = F.space
    limit = threshold_constant(p) - STRICT_MARGIN
    rate = F.c1.scalar * space.horizon
    growth = np.where(
        rate > 0, np.expm1(rate) / np.where(rate > 0, F.c1.scalar, 1.0), space.horizon
    )
    coupling = growth * F.c2.scalar
    violated = coupling >= limit
    if np.any(violated):
        block = _first_block(space, violated)
        raise BudgetError(
            f"C2 (exp(C1 T) - 1) / C1 = {coupling[np.argmax(violated)]:.4g} on base "
            f"block {block} is not below c_p = {threshold_constant(p)}",
            block,
        )
    counts = np.zeros(space.n_atoms, dtype=np.int64)
    coefficient = np.zeros(space.n_atoms)
    with np.errstate(divide="ignore"):
        log_rate = np.log(rate)
    for k in range(1, MAX_ITERATION_COUNT + 1):
        term = np.where(rate > 0, 2.0 * np.exp(k * log_rate - math.lgamma(k + 1)), 0.0)
        bound = term + coupling
        fresh = (counts == 0) & (bound < limit)
        counts[fresh] = k
        coefficient[fresh] = bound[fresh]
        if np.all(counts):
            break
    if not np.all(counts):
        block = _first_block(space, counts == 0)
        raise BudgetError(
            f"No iteration count up to {MAX_ITERATION_COUNT} is admissible on base "
            f"block {block}",
            block,
        )
    return RandomIterCount(space, counts, 0), L0Value(space, coefficient)


def solve_bsde_integral(
    F: IntegralGenerator,
    xi: L0Value,
    p: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 1000,
    *,
    start: L0Value | None = None,
    base: PartitionLike = 0,
    bound_samples: int = 0,
    rng: np.random.Generator | None = None,
    trace: bool = False,
) -> tuple[BseSolution, SolveReport]:
    """Solve Y_t = xi + sum_{s>=t} f(s, Y, M) dt + M_T - M_t for an integral driver.

    The random iteration count L is chosen per base block from the Lipschitz
    constants C1 and C2 of the driver, and bound_samples sampled pairs check
    the resulting iterate bound of F^(L).

    """
    p = F.p if p is None else float(p)
    counts, coefficient = integral_iteration_counts(F, p)
    logger.info("integral solver: L per base block %s", counts.per_block())
    budget = ContractionBudget(F.space, coefficient, p=p, counts=counts)
    check: CheckReport | None = None
    if bound_samples:
        rng = rng if rng is not None else np.random.default_rng(0)
        pairs = [
            (random_pair(F.space, rng, xi.dim), random_pair(F.space, rng, xi.dim))
            for _ in range(bound_samples)
        ]
        check = iterate_bound_check(F, counts, coefficient, p, pairs)
        if not check.passed:
            logger.warning("integral solver: iterate bound violated %s", check.violations)
    solution, report = solve_bse_contraction(
        F,
        xi,
        budget,
        tol,
        max_iter,
        start=start,
        base=base,
        rng=rng,
        trace=trace,
        label="integral",
    )
    leaders = F.space.base.leaders
    report.extras["c1"] = [float(v) for v in F.c1.scalar[leaders]]
    report.extras["c2"] = [float(v) for v in F.c2.scalar[leaders]]
    report.extras["random_counts"] = counts.per_block()
    if check is not None:
        report.extras["iterate_bound"] = check.as_dict()
    return solution, report


def subinterval_counts(C: L0Value, n_steps: int, dt: float) -> np.ndarray:
    """Smallest k <= N per base block with C sqrt(3 d (d + 1)) < 1/5, d = T/k.

    Returns the per atom counts.

    Raises
    ------
    BudgetError
        If even k = N is not admissible on some base block.

    """
    space = C.space
    horizon = n_steps * dt
    counts = np.zeros(space.n_atoms, dtype=np.int64)
    for k in range(1, n_steps + 1):
        width = horizon / k
        admissible = C.scalar * math.sqrt(3.0 * width * (width + 1.0)) < 0.2 - STRICT_MARGIN
        counts[(counts == 0) & admissible] = k
        if np.all(counts):
            return counts
    block = _first_block(space, counts == 0)
    raise BudgetError(
        f"Lipschitz constant {float(C.scalar[space.base.leaders[block]])} on base block "
        f"{block} admits no subinterval count up to {n_steps}",
        block,
    )


def stage_ends(counts: np.ndarray, n_steps: int, j: int) -> np.ndarray:
    """Number of grid steps covered by the last j of k subintervals, j*N/k rounded.

    Beyond k the whole grid is covered.

    """
    j = np.minimum(j, counts)
    return (j * n_steps + counts // 2) // counts


def solve_bsde_zu(
    F: PointwiseGenerator,
    xi: L0Value,
    tol: float = 1e-8,
    max_iter: int = 1000,
    *,
    C: Any = None,
    base: PartitionLike = 0,
    label: str = "zu",
) -> tuple[BseSolution, SolveReport]:
    """Solve Y_t = xi + sum_{s>=t} f(s, Y_s, Z_s, U_s) dt + M_T - M_t with p = 2.

    The horizon is cut, per base block, into k subintervals of length d = T/k
    with k minimal under C sqrt(3 d (d + 1)) < 1/5, the cut points j T/k being
    rounded to the nearest grid time. Stage j solves the equation with the
    driver active on the j-th subinterval from the end, the driver frozen at
    the previous stage solution on the later subintervals and switched off
    before.

    """
    space = F.space
    n_steps = space.n_steps
    lipschitz = F.lipschitz() if C is None else base_parameter(space, C, "C", nonnegative=True)
    counts = subinterval_counts(lipschitz, n_steps, space.dt)
    width = space.horizon / counts
    stage_coefficient = lipschitz.scalar * np.sqrt(3.0 * width * (width + 1.0))
    per_block = [int(counts[a]) for a in space.base.leaders]
    logger.info("%s: subinterval counts per base block %s", label, per_block)
    report = SolveReport(label=label, status="running", iteration_counts=per_block)
    steps = np.arange(n_steps)[:, None]
    driver_values = np.zeros((n_steps, space.n_atoms, xi.dim))
    solution: BseSolution | None = None
    start: L0Value | None = None
    for j in range(1, int(counts.max()) + 1):
        upper = n_steps - stage_ends(counts, n_steps, j - 1)
        lower = n_steps - stage_ends(counts, n_steps, j)
        active = ((steps >= lower) & (steps < upper) & (j <= counts)).astype(float)
        later = (steps >= upper).astype(float)
        stage = MaskedGenerator(F, active, later[..., None] * driver_values)
        budget = ContractionBudget(space, stage_coefficient, p=2.0)
        solution, stage_report = solve_bse_contraction(
            stage,
            xi,
            budget,
            tol / (int(counts.max()) + 1),
            max_iter,
            start=start,
            base=base,
            stability_samples=0,
            label=f"{label} stage {j}",
        )
        report.stages.append(stage_report)
        report.iterations += stage_report.iterations
        start = pi(solution.Y, solution.M)
        prepared = F.prepare(solution.M)
        driver_values = np.stack(
            [F.integrand(k, solution.Y, solution.M, prepared) for k in range(n_steps)]
        )
    assert solution is not None
    solution.decomposition = martingale_decompose(solution.M, F.drivers)
    report.status = "converged"
    report.extras["lipschitz"] = [float(lipschitz.scalar[a]) for a in space.base.leaders]
    report.extras["subinterval_width"] = [float(width[a]) for a in space.base.leaders]
    report.extras["stage_bounds"] = [
        [
            n_steps - int(stage_ends(counts[a], n_steps, j))
            for j in range(int(counts[a]), -1, -1)
        ]
        for a in space.base.leaders
    ]
    return _finish(F, xi, solution, report, tol), report


def solve_bsde_delayed(
    F: DelayedGenerator,
    xi: L0Value,
    tol: float = 1e-8,
    max_iter: int = 1000,
    *,
    base: PartitionLike = 0,
) -> tuple[BseSolution, SolveReport]:
    """Solve the delayed equation through its undelayed counterpart.

    Swapping the double sum gives F_T(M) = sum_m v([t_0, t_{N-1-m}]) g(t_m, Z_m,
    U_m) dt, so both generators share their G map. The undelayed equation is
    solved with the coefficient v([t_0, t_N]) C_g and the delayed solution is
    recovered from the common fixed point.

    """
    undelayed = F.undelayed()
    solution, report = solve_bsde_zu(
        undelayed, xi, tol, max_iter, C=F.lipschitz(), base=base, label="delayed"
    )
    gap = F.swap_gap(solution.M, undelayed)
    report.extras["swap_gap"] = gap
    if gap > 1e-12:
        message = f"delayed and undelayed terminal values differ by {gap:.3e}"
        report.flags.append(message)
        logger.warning("delayed: %s", message)
    V = pi(solution.Y, solution.M)
    delayed = phi(F, V, tol / 100.0)
    delayed.decomposition = solution.decomposition
    return _finish(F, xi, delayed, report, tol), report


class NonexpansiveResult(Atom):
    """Outcome of a Mann iteration: a solution only when the iteration converged."""

    solution = Typed(BseSolution)

    report = Typed(SolveReport)

    #: Sampled nonexpansiveness of G.
    monitor = Typed(CheckReport)

    @property
    def status(self) -> str:
        return self.report.status


def solve_nonexpansive(
    F: GeneratorSpec,
    xi: L0Value,
    center: L0Value,
    radius: Any,
    lam: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    *,
    p: float = 2.0,
    base: PartitionLike = 0,
    samples: int = 4,
    start: L0Value | None = None,
    rng: np.random.Generator | None = None,
    trace: bool = False,
) -> NonexpansiveResult:
    """Mann iteration V <- (1 - lam) V + lam G(V) on a conditional ball.

    Nonexpansiveness of G is monitored on sampled pairs, the ball of the given
    center and radius is checked to be mapped into itself on sampled boundary
    points. The iteration starts from start, the center by default.
    Failing to converge yields an inconclusive result.

    Raises
    ------
    SelfMapError
        If a sampled boundary point is mapped outside the ball, the point being
        attached as witness.

    """
    if not 0.0 < lam <= 1.0:
        raise ParameterError(f"The averaging weight must lie in (0, 1], got {lam}")
    space = F.space
    norm = CondNorm(space, p, base)
    radius = base_parameter(space, radius, "radius", nonnegative=True)
    outer = _outer_tolerance(norm, tol)
    mapping = mapping_of(F, xi, outer / 10.0)
    rng = rng if rng is not None else np.random.default_rng(0)

    def boundary_point() -> L0Value:
        direction = random_value(space, rng, dim=xi.dim)
        size = norm(direction).scalar
        return center + direction * (radius.scalar / np.where(size > 0, size, 1.0))[:, None]

    monitor = CheckReport(name="nonexpansive", tolerance=1e-10)
    for i in range(samples):
        V, W = boundary_point(), center + (boundary_point() - center) * rng.uniform()
        lhs = norm(mapping(V) - mapping(W)).scalar
        rhs = norm(V - W).scalar
        deviation = max(0.0, float(np.max(lhs - rhs))) / max(1.0, float(np.max(rhs)))
        monitor.check(deviation, f"pair {i}")
        reach = norm(mapping(V) - center).scalar
        excess = float(np.max(reach - radius.scalar))
        if excess > 1e-10 * max(1.0, float(np.max(radius.scalar))):
            raise SelfMapError(
                f"G maps a boundary point {excess:.3e} outside the ball", witness=V
            )
    if not monitor.passed:
        logger.warning("nonexpansive: sampled G is expansive %s", monitor.violations)

    report = SolveReport(label="nonexpansive", status="running")
    report.extras["lambda"] = lam
    V = center if start is None else start
    for outer_step in range(1, max_iter + 1):
        image = mapping(V)
        residual = norm.blocks(norm(image - V))
        report.iterations = outer_step
        report.residuals.append(float(np.max(residual)))
        if trace:
            report.trace.append(V)
        if float(np.max(residual)) <= outer:
            report.block_residuals = [float(r) for r in residual]
            report.status = "converged"
            solution = _finish(F, xi, phi(F, V, outer / 10.0), report, tol)
            logger.info("nonexpansive: converged after %d iterations", outer_step)
            return NonexpansiveResult(solution=solution, report=report, monitor=monitor)
        V = V * (1.0 - lam) + image * lam
    report.status = "inconclusive"
    message = f"no convergence within {max_iter} Mann iterations"
    report.flags.append(message)
    logger.warning("nonexpansive: %s", message)
    return NonexpansiveResult(report=report, monitor=monitor)


def counterexample_generator(space) -> PathFunctionalGenerator:
    """F_t = a t Y_0 with a T = 1."""
    return PathFunctionalGenerator(space, a=1.0 / space.horizon)


def enumerate_counterexample_solutions(
    xi: L0Value, a: Any, samples: Sequence[Any]
) -> list[BseSolution]:
    """Closed form solutions Y_t = (1 - t/T) Y_0 + E_t(xi), M_t = -E_t(xi).

    Raises
    ------
    ParameterError
        If E_0(xi) does not vanish or a T differs from 1.

    """
    space = xi.space
    F = PathFunctionalGenerator(space, a=a)
    scale = max(1.0, float(np.max(np.abs(xi.values))))
    if np.max(np.abs(block_average(space, xi.values, 0))) > 1e-12 * scale:
        raise ParameterError("The counterexample needs E_0(xi) = 0")
    if np.max(np.abs(F.a.scalar * space.horizon - 1.0)) > 1e-12:
        raise ParameterError("The counterexample needs a T = 1")
    expectations = np.stack(
        [block_average(space, xi.values, partition) for partition in space.partitions]
    )
    expectations[-1] = xi.values
    elapsed = ((space.grid - space.grid[0]) / space.horizon)[:, None, None]
    solutions = []
    for sample in samples:
        if isinstance(sample, L0Value):
            if not is_measurable(sample, 0):
                raise MeasurabilityError("Y_0 must be measurable w.r.t. partition 0")
            initial = sample.values
        else:
            initial = base_parameter(space, sample, "Y_0").values
        Y = AdaptedProcess(space, (1.0 - elapsed) * initial[None] + expectations, label="Y")
        M = MartingaleProcess(space, -expectations, label="M")
        solution = BseSolution(Y=Y, M=M)
        solution.residual = float(np.max(bse_residual(F, xi, solution).scalar))
        solutions.append(solution)
    return solutions


def solve_by_concatenation(
    F: GeneratorSpec,
    parts: Sequence[tuple[Any, L0Value]],
    budget: ContractionBudget,
    tol: float = 1e-8,
    max_iter: int = 1000,
    *,
    direct: bool = True,
) -> tuple[BseSolution, SolveReport]:
    """Glue classical solves of every (block, xi_n) along the blocks.

    Blocks are unions of blocks of partitions[0] given as atom indices or
    boolean masks. With direct set, the glued terminal condition is also
    solved in one conditional solve and both solutions are compared.

    Raises
    ------
    PartitionError
        If a block is not measurable w.r.t. partition 0, or the blocks overlap
        or miss atoms.
    ConvergenceError
        If the glued solution misses the tolerance or, with direct set, differs
        from the direct solve by more than AGREEMENT_TOLERANCE.

    """
    space = F.space
    masks = []
    for block, _ in parts:
        mask = np.zeros(space.n_atoms, dtype=bool)
        mask[np.asarray(block)] = True
        if not np.array_equal(mask, mask[space.base.representatives]):
            raise PartitionError("Concatenation blocks must be unions of base blocks")
        masks.append(mask)
    report = SolveReport(label="concatenation", status="running")
    solutions = []
    trivial = space.trivial_partition()
    for i, (_, xi_n) in enumerate(parts):
        solution, part_report = solve_bse_contraction(
            F, xi_n, budget, tol, max_iter, base=trivial, label=f"part {i}"
        )
        report.stages.append(part_report)
        report.iterations += part_report.iterations
        solutions.append(solution)
    glued = concatenate(list(zip(masks, solutions)))
    xi = concatenate([(mask, xi_n) for mask, (_, xi_n) in zip(masks, parts)])
    _finish(F, xi, glued, report, tol)
    if glued.residual > tol:
        report.status = "mismatch"
        raise ConvergenceError(
            f"concatenation: glued residual {glued.residual:.3e} above tolerance "
            f"{tol:.1e}",
            report,
        )
    if direct:
        reference, direct_report = solve_bse_contraction(
            F, xi, budget, tol, max_iter, label="direct"
        )
        report.stages.append(direct_report)
        gap = float(
            np.max(np.abs(glued.Y.values - reference.Y.values))
            + np.max(np.abs(glued.M.values - reference.M.values))
        )
        report.extras["direct_gap"] = gap
        if gap > AGREEMENT_TOLERANCE:
            report.status = "mismatch"
            message = f"glued and direct solutions differ by {gap:.3e}"
            report.flags.append(message)
            raise ConvergenceError(f"concatenation: {message}", report)
    report.status = "converged"
    return glued, report


def brute_force_oracle(
    F: PointwiseGenerator, xi: L0Value, *, tol: float = 1e-13, max_iter: int = 10_000
) -> BseSolution:
    """Backward induction Y_k = E_k(Y_{k+1}) + f(t_k, Y_k, Z_k, U_k) dt.

    (Z_k, U_k) are the node coefficients of the martingale increment
    -(Y_{k+1} - E_k(Y_{k+1})) and the implicit step is solved by scalar
    fixed point iteration.

    Raises
    ------
    ParameterError
        If |a| dt max_t w_t >= 1, the implicit step being then not contracting.

    """
    space = F.space
    if xi.space is not space:
        raise ParameterError("The terminal condition lives on another space")
    stiffness = np.abs(F.a.scalar) * space.dt * F.step_weights.max()
    if np.any(stiffness >= 1.0):
        raise ParameterError(
            f"The implicit step is not contracting (|a| dt = {float(stiffness.max()):.3g})"
        )
    increments = np.stack([d.increments()[:, :, 0] for d in F.drivers], axis=-1)
    Y = np.zeros((space.n_steps + 1, space.n_atoms, xi.dim))
    Y[-1] = xi.values
    jumps = np.zeros((space.n_steps, space.n_atoms, xi.dim))
    for k in range(space.n_steps - 1, -1, -1):
        mean = block_average(space, Y[k + 1], k)
        jumps[k] = Y[k + 1] - mean
        theta, _ = project_step(space, k, increments[k], -jumps[k])
        z, u = theta[:, 0, :], theta[:, 1:, :]
        y = mean
        for _ in range(max_iter):
            new = mean + F.driver(k, y, z, u) * space.dt
            if np.max(np.abs(new - y)) <= tol:
                y = new
                break
            y = new
        Y[k] = y[space.partitions[k].representatives]
    M = np.concatenate([np.zeros((1, space.n_atoms, xi.dim)), -np.cumsum(jumps, axis=0)])
    solution = BseSolution(
        Y=AdaptedProcess(space, Y, label="Y"), M=MartingaleProcess(space, M, label="M")
    )
    solution.residual = float(np.max(bse_residual(F, xi, solution).scalar))
    return solution
