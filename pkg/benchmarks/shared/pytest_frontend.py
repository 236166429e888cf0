# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Expose the registered cases to pytest-benchmark."""

from collections.abc import Sequence

import pytest

from benchmarks.shared.case_registry import select_benchmark_cases
from benchmarks.shared.registry_types import BenchmarkCase

#: Groups whose single run lasts seconds, timed with a fixed number of rounds.
SLOW_GROUPS = frozenset({"all"})


def benchmark_case_params(
    *,
    families: Sequence[str] | None = None,
    groups: Sequence[str] | None = None,
    implementations: Sequence[str] | None = None,
) -> list[object]:
    cases = select_benchmark_cases(
        families=families,
        groups=groups,
        implementations=implementations,
    )
    return [
        pytest.param(case, id=case.benchmark_name.replace(" ", "-")) for case in cases
    ]


def run_pytest_benchmark(benchmark: object, case: BenchmarkCase) -> None:
    # Inputs are built outside of the timed region.
    operation = case.operation_factory()
    if case.group in SLOW_GROUPS:
        benchmark.pedantic(operation, rounds=3, iterations=1)
    else:
        benchmark(operation)
