# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Randomized property suites run by ``l0bse verify``.

Every suite takes a seeded generator and a number of cases and returns the
check reports of the identities it exercises. Violations are data, suites
never raise for them.

"""

import logging
import math

import numpy as np
from atom.api import Atom, Callable as CallableMember, Int, Str

from .bsecore import (
    G0_fixed_point_check,
    G_map,
    generator_stability_check,
    phi,
    pi,
    random_stability_samples,
)
from .errors import ConvergenceError
from .gexp import (
    GDriver,
    g_expectation,
    g_stability_check,
    lipschitz_estimate_check,
    tilted_expectation,
)
from .generators import (
    BoundedLipschitzGenerator,
    IntegralGenerator,
    PointwiseGenerator,
    ZUGenerator,
    make_generator,
)
from .l0algebra import (
    concatenate,
    l0_inf,
    l0_sup,
    random_event_partition,
    relative_gap,
    stability_check,
    stable_sup_witness,
)
from .probspace import (
    FilteredSpace,
    L0Value,
    block_average,
    build_space,
    cond_expect,
    random_space,
    random_value,
)
from .processes import (
    basis_drivers,
    cond_fubini_check,
    cond_orthogonality_check,
    doob_check,
    isometry_residual,
    martingale_decompose,
    random_martingale,
    representation_bound_check,
    stochastic_integral,
)
from .reporting import CheckReport
from .rnmodule import CondNorm, normal_structure_check, rnm_axiom_check
from .solvers import (
    ContractionBudget,
    brute_force_oracle,
    counterexample_generator,
    enumerate_counterexample_solutions,
    solve_bsde_integral,
    solve_bsde_zu,
    solve_by_concatenation,
    solve_nonexpansive,
)

logger = logging.getLogger(__name__)

#: Exponents exercised by the module and martingale suites.
EXPONENTS = (1.5, 2.0, 4.0, float("inf"))


class SuiteSpec(Atom):
    """A named property suite with its minimal and full case counts."""

    name = Str()

    run = CallableMember()

    #: Cases run by default.
    minimal = Int(5)

    #: Cases run with --full.
    full = Int(500)


def lattice_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    laws = CheckReport(name="lattice laws")
    gluing = CheckReport(name="concatenation")
    witness = CheckReport(name="stable sup witness", tolerance=0.0)
    lipschitz = CheckReport(name="lipschitz implies stable")
    for i in range(cases):
        space = random_space(rng, min_steps=1, max_steps=2)
        x, y = random_value(space, rng), random_value(space, rng)
        sup, inf = l0_sup([x, y]), l0_inf([x, y])
        laws.check(relative_gap(sup, l0_sup([y, x])), f"commutativity {i}")
        laws.check(relative_gap(sup + inf, x + y), f"modularity {i}")
        laws.check(max(0.0, float(np.max(x.scalar - sup.scalar))), f"upper bound {i}")
        partition = random_event_partition(space, rng, n_blocks=2)
        masks = partition.masks()
        glued = concatenate([(mask, value) for mask, value in zip(masks, (x, y))])
        gluing.check(
            max(
                float(np.max(np.abs(glued.values[mask] - value.values[mask]), initial=0.0))
                for mask, value in zip(masks, (x, y))
            ),
            f"agreement {i}",
        )
        eps = L0Value(space, rng.uniform(0.1, 1.0, space.n_atoms)[space.base.representatives])
        family = [random_value(space, rng) for _ in range(3)]
        _, chosen = stable_sup_witness(family, eps)
        margin = chosen.scalar - (l0_sup(family).scalar - eps.scalar)
        witness.check(0.0 if np.all(margin > 0) else float(-margin.min()) + 1e-300, f"{i}")
        slope = random_value(space, rng, meas=0)

        def mapping(value: L0Value, slope=slope) -> L0Value:
            return L0Value(value.space, np.tanh(value.values)) * slope

        samples = [(partition, [random_value(space, rng) for _ in masks])]
        lipschitz.merge(stability_check(mapping, samples))
    return [laws, gluing, witness, lipschitz]


def rnm_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    reports = []
    for p in EXPONENTS:
        report = CheckReport(name=f"rnm-axioms p={p:g}")
        for _ in range(cases):
            space = random_space(rng)
            samples = [
                (
                    random_value(space, rng, dim=2),
                    random_value(space, rng, dim=2),
                    random_value(space, rng, meas=0),
                )
            ]
            report.merge(rnm_axiom_check(CondNorm(space, p), samples))
        reports.append(report)
    structure = CheckReport(name="normal-structure", tolerance=0.0)
    for p in EXPONENTS[:-1]:
        for _ in range(max(1, cases // 3)):
            space = random_space(rng)
            family = [random_value(space, rng, dim=2) for _ in range(4)]
            structure.merge(normal_structure_check([family], CondNorm(space, p)))
    reports.append(structure)
    return reports


def doob_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    reports = []
    for p in EXPONENTS:
        report = CheckReport(name=f"doob p={p:g}")
        for _ in range(cases):
            report.merge(doob_check(random_martingale(random_space(rng), rng), p))
        reports.append(report)
    return reports


def fubini_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    report = CheckReport(name="conditional fubini", tolerance=1e-12)
    for _ in range(cases):
        space = random_space(rng)
        marks = int(rng.integers(1, 5))
        table = rng.normal(size=(space.n_atoms, marks))
        report.merge(cond_fubini_check(space, table, rng.uniform(0.0, 1.0, marks)))
    return [report]


def orthogonality_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    report = CheckReport(name="conditional orthogonality", tolerance=1e-12)
    for _ in range(cases):
        report.merge(cond_orthogonality_check(random_value(random_space(rng), rng, dim=2)))
    return [report]


def _decomposition_space(rng: np.random.Generator, i: int) -> FilteredSpace:
    if i % 2:
        return random_space(rng, max_branching=3)
    steps = int(rng.integers(1, 3))
    return build_space([4] * steps, base_branching=int(rng.integers(1, 3)), marks=1)


def decomposition_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    roundtrip = CheckReport(name="decomposition roundtrip")
    isometry = CheckReport(name="conditional isometry")
    covariance = CheckReport(name="decomposition scaling")
    bound = CheckReport(name="representation bound")
    for i in range(cases):
        space = _decomposition_space(rng, i)
        drivers = basis_drivers(space)
        theta = rng.normal(size=(space.n_steps, space.n_atoms, len(drivers), 1))
        for s in range(space.n_steps):
            theta[s] = theta[s][space.partitions[s].representatives]
        constructed = stochastic_integral(theta, drivers)
        decomposition = martingale_decompose(constructed, drivers)
        roundtrip.check(
            relative_gap(decomposition.reconstruct().values, constructed.values), f"{i}"
        )
        roundtrip.check(
            float(np.max(np.abs(decomposition.remainder.values), initial=0.0)), f"rest {i}"
        )
        M = random_martingale(space, rng)
        decomposition = martingale_decompose(M, drivers)
        isometry.check(isometry_residual(decomposition), f"{i}")
        scaled = martingale_decompose(M * 3.0, drivers)
        covariance.check(
            relative_gap(scaled.coefficients, 3.0 * decomposition.coefficients), f"{i}"
        )
        bound.merge(representation_bound_check(decomposition))
    return [roundtrip, isometry, covariance, bound]


def _small_integral(space: FilteredSpace, rng: np.random.Generator) -> IntegralGenerator:
    def block(scale: float) -> list[float]:
        return [float(v) for v in rng.uniform(-scale, scale, space.base.n_blocks)]

    return IntegralGenerator(space, h=block(1.0), a=block(0.03), b=block(0.03), c=block(0.02))


def bijection_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    identity = CheckReport(name="pi o phi identity")
    roundtrip = CheckReport(name="solution roundtrip", tolerance=2e-8)
    reconstruction = CheckReport(name="G0 reconstruction", tolerance=1e-8)
    for i in range(cases):
        space = random_space(rng, max_atoms=16)
        F = _small_integral(space, rng)
        V = random_value(space, rng)
        solution = phi(F, V, 1e-12)
        identity.check(relative_gap(pi(solution.Y, solution.M), V), f"{i}")
        xi = random_value(space, rng)
        solved, _ = solve_bsde_integral(F, xi, tol=1e-10)
        again = phi(F, pi(solved.Y, solved.M), 1e-12)
        roundtrip.check(
            relative_gap(again.Y.values, solved.Y.values)
            + relative_gap(again.M.values, solved.M.values),
            f"{i}",
        )
        G = ZUGenerator(space, h=0.5, m=0.05)
        zu, _ = solve_bsde_zu(G, xi, 1e-10)
        reconstruction.merge(G0_fixed_point_check(G, xi, zu, 1e-12))
    return [identity, roundtrip, reconstruction]


def stability_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    reports = []
    for kind, parameters in (
        ("integral", {"a": 0.1, "b": 0.2, "c": 0.1, "e": 0.1, "phi": "tanh"}),
        ("pointwise", {"a": 0.2, "m": 0.3, "kappa": 0.1}),
        ("delayed", {"m": 0.2}),
        ("path-functional", {"a": 1.0}),
        ("bounded-lipschitz", {"bound": 0.5}),
        ("bounded-integral", {"bound": 0.5}),
    ):
        report = CheckReport(name=f"stability {kind}")
        for _ in range(max(1, cases // 5)):
            space = random_space(rng, max_atoms=18, base_blocks=(2, 3))
            F = make_generator(kind, space, **parameters)
            samples = random_stability_samples(space, rng, 1)
            report.merge(generator_stability_check(F, samples, xi=random_value(space, rng)))
        reports.append(report)
    return reports


def contraction_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    uniqueness = CheckReport(name="uniqueness over starts", tolerance=1e-8)
    ratios = CheckReport(name="contraction ratio bound", tolerance=0.0)
    oracle = CheckReport(name="oracle agreement", tolerance=1e-8)
    concatenation = CheckReport(name="concatenation agreement", tolerance=1e-8)
    for i in range(max(1, cases // 10)):
        space = random_space(rng, max_atoms=16, base_blocks=(2, 3), uniform=True)
        F = _small_integral(space, rng)
        xi = random_value(space, rng)
        reference, report = solve_bsde_integral(F, xi, tol=1e-10)
        ratios.check(float(len(report.flags)), f"flags {i}")
        for j in range(3):
            other, _ = solve_bsde_integral(F, xi, tol=1e-10, start=random_value(space, rng))
            uniqueness.check(relative_gap(other.Y.values, reference.Y.values), f"{i}.{j}")
        G = PointwiseGenerator(space, h=0.3, a=0.02, m=0.03)
        zu, _ = solve_bsde_zu(G, xi, 1e-11)
        exact = brute_force_oracle(G, xi)
        oracle.check(float(np.max(np.abs(zu.Y.values - exact.Y.values))), f"{i}")
        budget = ContractionBudget(space, 0.02, p=2.0)
        Z = ZUGenerator(space, h=[float(v) for v in rng.normal(size=space.base.n_blocks)])
        parts = [
            (space.base.labels == b, random_value(space, rng))
            for b in range(space.base.n_blocks)
        ]
        try:
            _, glued_report = solve_by_concatenation(Z, parts, budget, 1e-10)
        except ConvergenceError as e:
            glued_report = e.report
        concatenation.check(float(glued_report.extras.get("direct_gap", math.inf)), f"{i}")
    return [uniqueness, ratios, oracle, concatenation]


def counterexample_mann_check(
    xi: L0Value,
    start: L0Value,
    report: CheckReport | None = None,
    *,
    rng: np.random.Generator | None = None,
    label: str = "",
) -> CheckReport:
    """Mann iteration of the counterexample generator from start.

    The limit V must satisfy G(V) = V and V - xi must be measurable w.r.t.
    partition 0, that is V = xi + Y_0 for some member of the family. Both
    deviations are recorded, a run that does not converge is inconclusive.

    """
    if report is None:
        report = CheckReport(name="counterexample mann", tolerance=1e-12)
    space = xi.space
    F = counterexample_generator(space)
    norm = CondNorm(space, 2.0)
    radius = norm(start - xi).scalar + 1.0
    result = solve_nonexpansive(F, xi, xi, radius, tol=1e-12, start=start, rng=rng)
    if result.solution is None:
        report.mark_inconclusive(f"{label}: no convergence")
        return report
    V = pi(result.solution.Y, result.solution.M)
    report.check(relative_gap(G_map(F, xi, V, 1e-14), V), f"{label} fixed point")
    shift = V - xi
    report.check(relative_gap(shift, cond_expect(shift, 0)), f"{label} member")
    return report


def nonexpansive_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    family = CheckReport(name="counterexample family", tolerance=1e-12)
    fixed = CheckReport(name="counterexample fixed points", tolerance=1e-12)
    distinct = CheckReport(name="distinct counterexample solutions", tolerance=0.0)
    counter = CheckReport(name="counterexample mann", tolerance=1e-12)
    monitor = CheckReport(name="nonexpansive monitor")
    mann = CheckReport(name="mann convergence", tolerance=1e-8)
    for i in range(max(1, cases // 10)):
        space = random_space(rng, max_atoms=16, base_blocks=(1, 2))
        raw = random_value(space, rng)
        xi = raw - cond_expect(raw, 0)
        starts = [0.0, 1.0, -1.0, 2.0, [float(v) for v in rng.normal(size=space.base.n_blocks)]]
        members = enumerate_counterexample_solutions(xi, 1.0 / space.horizon, starts)
        G = counterexample_generator(space)
        initial = set()
        for j, solution in enumerate(members):
            family.check(solution.residual, f"{i}.{j}")
            V = pi(solution.Y, solution.M)
            fixed.check(relative_gap(G_map(G, xi, V, 1e-14), V), f"{i}.{j}")
            initial.add(tuple(solution.Y.initial.scalar[space.base.leaders].tolist()))
        distinct.check(max(0, 5 - len(initial)), f"{i}")
        counterexample_mann_check(
            xi, xi + random_value(space, rng), counter, rng=rng, label=f"{i}"
        )
        F = BoundedLipschitzGenerator(space, bound=0.5)
        center = L0Value.constant(space, 0.0)
        radius = CondNorm(space, 2.0)(xi).scalar + 0.5 * F.scale
        result = solve_nonexpansive(F, xi, center, radius, rng=rng)
        monitor.merge(result.monitor)
        if result.solution is None:
            logger.warning("nonexpansive suite: case %d inconclusive", i)
            mann.mark_inconclusive(f"{i}: {result.report.flags[-1]}")
            continue
        mann.check(result.solution.residual, f"{i}")
    return [family, fixed, distinct, counter, monitor, mann]


def gexp_suite(rng: np.random.Generator, cases: int) -> list[CheckReport]:
    linear = CheckReport(name="zero driver", tolerance=1e-12)
    tilt = CheckReport(name="tilt cross-check", tolerance=1e-9)
    lipschitz = CheckReport(name="g-expectation lipschitz")
    stability = CheckReport(name="g-expectation stability", tolerance=1e-9)
    for i in range(max(1, cases // 5)):
        space = build_space([2] * int(rng.integers(2, 4)), base_branching=2)
        xi = random_value(space, rng)
        t0 = int(rng.integers(0, space.n_steps))
        expected = block_average(space, xi.values, t0)
        zero = g_expectation(GDriver(), xi, t0)
        linear.check(float(np.max(np.abs(zero.values - expected))), f"{i}")
        mu = float(rng.uniform(-0.1, 0.1))
        tilted = tilted_expectation(space, xi, mu, t0)
        value = g_expectation(GDriver(mu=mu), xi, t0)
        tilt.check(float(np.max(np.abs(value.values - tilted.values))), f"{i}")
        lipschitz_estimate_check(
            GDriver(mu=0.3, kappa=0.2), xi, random_value(space, rng), t0, report=lipschitz
        )
        blocks = [np.flatnonzero(space.base.labels == b) for b in range(space.base.n_blocks)]
        stability.merge(
            g_stability_check(
                GDriver(kappa=0.1), blocks, [random_value(space, rng) for _ in blocks]
            )
        )
    return [linear, tilt, lipschitz, stability]


SUITES: dict[str, SuiteSpec] = {
    spec.name: spec
    for spec in (
        SuiteSpec(name="lattice", run=lattice_suite, minimal=5, full=500),
        SuiteSpec(name="rnm-axioms", run=rnm_suite, minimal=5, full=500),
        SuiteSpec(name="doob", run=doob_suite, minimal=5, full=500),
        SuiteSpec(name="fubini", run=fubini_suite, minimal=5, full=500),
        SuiteSpec(name="orthogonality", run=orthogonality_suite, minimal=5, full=500),
        SuiteSpec(name="decomposition", run=decomposition_suite, minimal=4, full=200),
        SuiteSpec(name="bijection", run=bijection_suite, minimal=2, full=200),
        SuiteSpec(name="stability", run=stability_suite, minimal=5, full=100),
        SuiteSpec(name="contraction", run=contraction_suite, minimal=10, full=100),
        SuiteSpec(name="nonexpansive", run=nonexpansive_suite, minimal=10, full=100),
        SuiteSpec(name="gexp", run=gexp_suite, minimal=5, full=200),
    )
}


def run_suite(
    name: str, seed: int = 0, cases: int | None = None, *, full: bool = False
) -> list[CheckReport]:
    """Run one suite, or every suite for "all", with a fresh seeded generator.

    Raises
    ------
    KeyError
        If the suite is unknown.

    """
    names = list(SUITES) if name == "all" else [name]
    reports = []
    for suite_name in names:
        spec = SUITES[suite_name]
        count = cases if cases is not None else (spec.full if full else spec.minimal)
        logger.info("verify: running %s on %d cases", suite_name, count)
        reports.extend(spec.run(np.random.default_rng(seed), count))
    return reports
