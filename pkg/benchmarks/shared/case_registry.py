# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Benchmark cases for the solvers and the property suites."""

from collections.abc import Callable, Sequence

import numpy as np

from benchmarks.shared.registry_types import BenchmarkCase
from l0bse import (
    ContractionBudget,
    IntegralGenerator,
    L0Value,
    PointwiseGenerator,
    RandomIterCount,
    build_space,
    solve_bse_contraction,
    solve_bsde_integral,
    solve_bsde_zu,
)
from l0bse.processes import basis_drivers
from l0bse.verify import SUITES, run_suite

#: Depth of the trees of the solve family, 2**8 paths per base block.
SOLVE_DEPTH = 8


def normalize_filter(values: Sequence[str] | None) -> set[str] | None:
    if values is None:
        return None
    normalized = {value for value in values if value}
    return normalized or None


def _call_terminal(space) -> L0Value:
    walk = basis_drivers(space)[0].terminal
    return L0Value(space, np.maximum(walk.values, 0.0))


def _contraction_solve() -> Callable[[], object]:
    space = build_space([2] * SOLVE_DEPTH, base_branching=2)
    F = IntegralGenerator(space, h=[0.5, -0.5], a=[0.05, 0.1], c=0.05)
    xi = _call_terminal(space)
    budget = ContractionBudget(space, 0.15, counts=RandomIterCount.from_blocks(space, [2, 3]))
    return lambda: solve_bse_contraction(F, xi, budget, 1e-10, stability_samples=0)


def _integral_solve() -> Callable[[], object]:
    space = build_space([2] * SOLVE_DEPTH, base_branching=2)
    F = IntegralGenerator(space, h=[0.5, -0.5], a=[0.05, 0.1], c=0.05)
    xi = _call_terminal(space)
    return lambda: solve_bsde_integral(F, xi, tol=1e-10)


def _zu_solve() -> Callable[[], object]:
    space = build_space([3] * 5, marks=1, base_branching=2)
    F = PointwiseGenerator(space, h=0.3, a=0.02, m=0.05, nu=[0.02])
    xi = _call_terminal(space)
    return lambda: solve_bsde_zu(F, xi, 1e-10)


def _suite(name: str) -> Callable[[], Callable[[], object]]:
    return lambda: lambda: run_suite(name, seed=0)


def _all_cases() -> list[BenchmarkCase]:
    cases = [
        BenchmarkCase("solve", "solve", "contraction", "contraction depth 8", _contraction_solve),
        BenchmarkCase("solve", "solve", "integral", "integral depth 8", _integral_solve),
        BenchmarkCase("solve", "solve", "zu", "zu depth 5 with marks", _zu_solve),
    ]
    cases += [
        BenchmarkCase("verify", "minimal", name, f"verify {name}", _suite(name))
        for name in SUITES
    ]
    cases.append(BenchmarkCase("verify", "all", "all", "verify all", _suite("all")))
    return cases


def select_benchmark_cases(
    *,
    families: Sequence[str] | None = None,
    groups: Sequence[str] | None = None,
    implementations: Sequence[str] | None = None,
) -> list[BenchmarkCase]:
    family_filter = normalize_filter(families)
    group_filter = normalize_filter(groups)
    implementation_filter = normalize_filter(implementations)
    return [
        case
        for case in _all_cases()
        if (family_filter is None or case.family in family_filter)
        and (group_filter is None or case.group in group_filter)
        and (implementation_filter is None or case.implementation in implementation_filter)
    ]
