# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Reports produced by property checks and iterative solvers.

Both report kinds serialize to plain dictionaries with a stable key order so
that identical runs produce identical report files.

"""

import math
import numbers
from typing import Any

from atom.api import Atom, Dict, Enum, Float, Int, List, Str


def _clean(value: float) -> float | None:
    value = float(value)
    return value if math.isfinite(value) else None


def _plain(value: Any) -> Any:
    """JSON friendly copy: non finite floats become None, numpy scalars builtins."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, numbers.Integral):
        return int(value)
    return _clean(value)


class CheckReport(Atom):
    """Outcome of a property check.

    Deviations are non negative numbers measuring how far a sample is from
    satisfying the checked identity or inequality. A sample violates the
    property when its deviation exceeds the tolerance.

    """

    #: Name of the checked identity.
    name = Str()

    #: Largest admissible deviation.
    tolerance = Float(1e-10)

    #: Number of checked samples.
    cases = Int(0)

    #: Largest observed deviation.
    worst = Float(0.0)

    #: Description of the violating samples.
    violations = List(str)

    #: Samples that could not be decided, they do not fail the check.
    inconclusive = List(str)

    def check(self, deviation: float, label: str = "") -> bool:
        """Record one sample and return whether it satisfies the property."""
        deviation = float(deviation)
        self.cases += 1
        if not math.isfinite(deviation):
            deviation = math.inf
        self.worst = max(self.worst, deviation)
        if deviation > self.tolerance:
            self.violations.append(
                f"{label or f'case {self.cases - 1}'}: deviation {deviation:.3e}"
            )
            return False
        return True

    def mark_inconclusive(self, label: str) -> None:
        """Record a sample that could not be decided."""
        self.cases += 1
        self.inconclusive.append(label)

    @property
    def passed(self) -> bool:
        return not self.violations

    def merge(self, other: "CheckReport") -> "CheckReport":
        """Fold another report of the same property into this one."""
        self.cases += other.cases
        self.worst = max(self.worst, other.worst)
        self.violations.extend(other.violations)
        self.inconclusive.extend(other.inconclusive)
        return self

    def __bool__(self) -> bool:
        return self.passed

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "tolerance": self.tolerance,
            "worst_deviation": _clean(self.worst),
            "violations": list(self.violations),
            "inconclusive": list(self.inconclusive),
        }


class SolveReport(Atom):
    """Trace of a fixed point iteration."""

    #: What was solved.
    label = Str()

    #: Termination status.
    status = Enum(
        "running", "converged", "max_iter", "diverged", "inconclusive", "mismatch"
    )

    #: Number of outer iterations performed.
    iterations = Int(0)

    #: Worst residual over the base blocks after every outer iteration.
    residuals = List(float)

    #: Final residual of every base block.
    block_residuals = List(float)

    #: Observed contraction ratio of every base block per outer iteration,
    #: None where the previous step was below the noise floor.
    ratios = List()

    #: Declared contraction factor of every base block.
    bounds = List(float)

    #: Random iteration count (L or k) of every base block.
    iteration_counts = List(int)

    #: Ratio violations and other warnings.
    flags = List(str)

    #: Residual of the returned solution in the equation it solves.
    solution_residual = Float(math.nan)

    #: Reports of nested stages (random subintervals, parts).
    stages = List()

    #: Free form scalars worth reporting (constants, thresholds).
    extras = Dict()

    #: Iterates kept when tracing is requested.
    trace = List()

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def worst_ratio(self) -> list[float | None]:
        """Largest observed ratio of every base block over the whole run."""
        worst: list[float | None] = [None] * len(self.bounds)
        for row in self.ratios:
            for b, value in enumerate(row):
                if value is not None and (worst[b] is None or value > worst[b]):
                    worst[b] = value
        return worst

    def as_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "status": self.status,
            "iterations": self.iterations,
            "iteration_counts": list(self.iteration_counts),
            "bounds": [_clean(b) for b in self.bounds],
            "block_residuals": [_clean(r) for r in self.block_residuals],
            "solution_residual": _clean(self.solution_residual),
            "worst_ratios": [None if r is None else _clean(r) for r in self.worst_ratio()],
            "residuals": [_clean(r) for r in self.residuals],
            "flags": list(self.flags),
            "extras": {k: _plain(self.extras[k]) for k in self.extras},
            "stages": [stage.as_dict() for stage in self.stages],
        }
