# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Conditional g-expectations and the convex risk measures they induce.

E^g[xi | F_t0] is the value at t0 of the solution of

    Y_t = xi + sum_{s>=t} g(s, Y_s, Z_s) dt - sum_{s>=t} Z_s dW_s

solved on the space restricted to the grid t_t0, ..., t_N, so that the
conditioning partition of the norms is partitions[t0].

"""

import logging
import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from atom.api import Atom, Float

from .errors import BudgetError, MeasurabilityError, ParameterError, PartitionError
from .generators import PointwiseGenerator
from .l0algebra import concatenate
from .probspace import FilteredSpace, L0Value, block_average, is_measurable
from .processes import basis_drivers
from .reporting import CheckReport
from .solvers import brute_force_oracle, solve_bsde_zu

logger = logging.getLogger(__name__)

#: zu runs the subinterval solver, induction the backward induction and auto falls
#: back to the induction when the driver is too steep for the subinterval solver.
G_EXPECTATION_METHODS = ("auto", "zu", "induction")


class GDriver(Atom):
    """g(t, y, z) = h + a y + mu z + kappa |z| with kappa >= 0.

    z is the integrand of Y against the walk. The driver is convex in z and
    Lipschitz with constant |a| + |mu| + kappa.

    """

    h = Float(0.0)
    a = Float(0.0)
    mu = Float(0.0)
    kappa = Float(0.0)

    def __init__(
        self, *, h: float = 0.0, a: float = 0.0, mu: float = 0.0, kappa: float = 0.0
    ) -> None:
        if kappa < 0:
            raise ParameterError(f"kappa must be non negative, got {kappa}")
        super().__init__(h=float(h), a=float(a), mu=float(mu), kappa=float(kappa))

    @property
    def lipschitz(self) -> float:
        return abs(self.a) + abs(self.mu) + self.kappa

    def as_generator(self, space: FilteredSpace) -> PointwiseGenerator:
        # The martingale part of the equation is M = -sum Z dW, hence the sign of m.
        return PointwiseGenerator(
            space, h=self.h, a=self.a, m=-self.mu, kappa=self.kappa
        )

    def __repr__(self) -> str:
        return f"GDriver(h={self.h}, a={self.a}, mu={self.mu}, kappa={self.kappa})"


def g_expectation(
    g: GDriver,
    xi: L0Value,
    t0: int = 0,
    tol: float = 1e-11,
    *,
    method: str = "auto",
) -> L0Value:
    """E^g[xi | F_t0], measurable w.r.t. partitions[t0].

    Raises
    ------
    BudgetError
        If method is zu and the driver admits no subinterval count.

    """
    if method not in G_EXPECTATION_METHODS:
        raise ParameterError(
            f"Unknown method {method!r}, expected one of {G_EXPECTATION_METHODS}"
        )
    space = xi.space
    if not 0 <= t0 <= space.n_steps:
        raise ParameterError(f"t0 must lie in [0, {space.n_steps}], got {t0}")
    if t0 == space.n_steps:
        return L0Value(space, xi.values)
    restricted = space.restricted(t0)
    terminal = L0Value(restricted, xi.values)
    generator = g.as_generator(restricted)
    if method != "induction":
        try:
            solution, _ = solve_bsde_zu(generator, terminal, tol, label="g-expectation")
        except BudgetError:
            if method == "zu":
                raise
            logger.info(
                "g-expectation: Lipschitz constant %s too large for the subinterval "
                "solver, using backward induction",
                g.lipschitz,
            )
        else:
            return L0Value(space, solution.Y.values[0])
    solution = brute_force_oracle(generator, terminal)
    return L0Value(space, solution.Y.values[0])


def g_risk_measure(
    g: GDriver, xi: L0Value, t0: int = 0, tol: float = 1e-11, *, method: str = "auto"
) -> L0Value:
    """rho(xi) = E^g[-xi | F_t0] for a driver depending on z only.

    Raises
    ------
    ParameterError
        If the driver depends on y or does not vanish at z = 0.

    """
    if g.h != 0.0 or g.a != 0.0:
        raise ParameterError(
            f"A risk measure driver must depend on z only and vanish at 0, got {g!r}"
        )
    return g_expectation(g, -xi, t0, tol, method=method)


def lipschitz_estimate_check(
    g: GDriver,
    xi1: L0Value,
    xi2: L0Value,
    t0: int = 0,
    *,
    tolerance: float = 1e-10,
    report: CheckReport | None = None,
) -> CheckReport:
    """|E^g[xi1] - E^g[xi2]| <= C1 E[|xi1 - xi2|^2 | F_t0]^(1/2) atomwise.

    C1 = exp(8 (1 + C^2) (T - t_t0)). Samples accumulate in report when given.

    """
    space = xi1.space
    if report is None:
        report = CheckReport(name="g-expectation lipschitz", tolerance=tolerance)
    constant = math.exp(8.0 * (1.0 + g.lipschitz**2) * (space.grid[-1] - space.grid[t0]))
    lhs = (g_expectation(g, xi1, t0) - g_expectation(g, xi2, t0)).norm().scalar
    gap = np.sum((xi1.values - xi2.values) ** 2, axis=1)
    rhs = constant * np.sqrt(block_average(space, gap, t0))
    report.check(max(0.0, float(np.max(lhs - rhs))), f"case {report.cases}")
    return report


def _event_masks(space: FilteredSpace, blocks: Sequence[Any], t0: int) -> list[np.ndarray]:
    masks = []
    for block in blocks:
        mask = np.zeros(space.n_atoms, dtype=bool)
        mask[np.asarray(block)] = True
        if not np.array_equal(mask, mask[space.partitions[t0].representatives]):
            raise PartitionError(
                f"Event blocks must be measurable w.r.t. partition {t0}"
            )
        masks.append(mask)
    return masks


def g_stability_check(
    g: GDriver,
    blocks: Sequence[Any],
    xis: Sequence[L0Value],
    t0: int = 0,
    *,
    tolerance: float = 1e-9,
) -> CheckReport:
    """E^g[sum 1_{A_n} xi_n | F_t0] = sum 1_{A_n} E^g[xi_n | F_t0].

    Raises
    ------
    PartitionError
        If a block is not measurable w.r.t. partitions[t0], or the blocks overlap
        or miss atoms.

    """
    if len(blocks) != len(xis):
        raise ParameterError(f"Got {len(blocks)} blocks for {len(xis)} terminal values")
    space = xis[0].space
    masks = _event_masks(space, blocks, t0)
    report = CheckReport(name="g-expectation stability", tolerance=tolerance)
    lhs = g_expectation(g, concatenate(list(zip(masks, xis))), t0)
    rhs = concatenate([(mask, g_expectation(g, xi, t0)) for mask, xi in zip(masks, xis)])
    report.check(float(np.max(np.abs(lhs.values - rhs.values))), "glued")
    return report


def tilted_expectation(
    space: FilteredSpace, xi: L0Value, mu: float, t0: int = 0
) -> L0Value:
    """Expectation of xi under the measure tilted by 1 + mu dt dW / E_k[dW^2].

    This is E^g[xi | F_t0] for g = mu z, computed without any solver.

    """
    walk = basis_drivers(space)[0].increments()
    values = np.asarray(xi.values, dtype=float)
    for k in range(space.n_steps - 1, t0 - 1, -1):
        dW = walk[k]
        variance = block_average(space, dW**2, k)
        tilt = 1.0 + mu * space.dt * np.divide(
            dW, variance, out=np.zeros_like(dW), where=variance > 0
        )
        values = block_average(space, values * tilt, k)
    return L0Value(space, values)


def risk_axioms_check(
    g: GDriver,
    samples: Sequence[tuple[L0Value, L0Value, L0Value]],
    t0: int = 0,
    *,
    tolerance: float = 1e-9,
) -> CheckReport:
    """Monotonicity and conditional translation invariance of rho^g.

    Every sample is (xi, bump, m) with bump >= 0 and m measurable w.r.t.
    partitions[t0]: rho(xi + bump) <= rho(xi) and rho(xi + m) = rho(xi) - m.

    """
    report = CheckReport(name="risk measure axioms", tolerance=tolerance)
    for i, (xi, bump, m) in enumerate(samples):
        if np.any(bump.values < 0):
            raise ParameterError("Monotonicity bumps must be non negative")
        if not is_measurable(m, t0):
            raise MeasurabilityError(f"Cash amounts must be measurable w.r.t. partition {t0}")
        rho = g_risk_measure(g, xi, t0)
        bumped = g_risk_measure(g, xi + bump, t0)
        report.check(
            max(0.0, float(np.max(bumped.values - rho.values))), f"monotonicity {i}"
        )
        shifted = g_risk_measure(g, xi + m, t0)
        report.check(
            float(np.max(np.abs(shifted.values - (rho.values - m.values)))),
            f"translation {i}",
        )
    return report
