# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Shared benchmark case types."""

from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class BenchmarkCase:
    """Single benchmark case.

    The factory builds the inputs once and returns the timed operation.

    """

    family: str
    group: str
    implementation: str
    benchmark_name: str
    operation_factory: Callable[[], Callable[[], object]]
