# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Backward stochastic equations in L0 modules over finite filtered spaces.

This module re-exports the spaces, processes, generators and solvers most
users need. The command line front end lives in :mod:`l0bse.cli`.
"""

from .bsecore import (
    BseSolution,
    G0_fixed_point_check,
    G0_map,
    G_map,
    GeneratorSpec,
    LeftSumGenerator,
    bse_residual,
    generator_stability_check,
    iterate_generator,
    phi,
    pi,
    solve_condition_S,
)
from .errors import (
    BudgetError,
    ConfigError,
    ConvergenceError,
    DegenerateDriverError,
    DimensionError,
    L0bseError,
    MeasurabilityError,
    ParameterError,
    PartitionError,
    PropertyError,
    SelfMapError,
    SpaceError,
)
from .generators import (
    BoundedIntegralGenerator,
    BoundedLipschitzGenerator,
    DelayedGenerator,
    IntegralGenerator,
    PathFunctionalGenerator,
    PointwiseGenerator,
    RandomMeasure,
    ZeroGenerator,
    ZUGenerator,
    make_generator,
)
from .gexp import (
    GDriver,
    g_expectation,
    g_risk_measure,
    g_stability_check,
    lipschitz_estimate_check,
    risk_axioms_check,
    tilted_expectation,
)
from .l0algebra import EventPartition, concatenate, glue, l0_inf, l0_sup
from .probspace import (
    FilteredSpace,
    L0Value,
    Partition,
    block_average,
    build_space,
    cond_expect,
    is_measurable,
)
from .processes import (
    AdaptedProcess,
    Decomposition,
    MartingaleProcess,
    basis_drivers,
    doob_constant,
    martingale_decompose,
    martingale_from_terminal,
    sp_norm,
    stochastic_integral,
)
from .reporting import CheckReport, SolveReport
from .rnmodule import (
    CondNorm,
    RandomIterCount,
    cond_inner,
    cond_norm,
    fixed_point_random_contraction,
    iterate_random,
)
from .solvers import (
    ContractionBudget,
    NonexpansiveResult,
    brute_force_oracle,
    enumerate_counterexample_solutions,
    solve_bse_contraction,
    solve_bsde_delayed,
    solve_bsde_integral,
    solve_bsde_zu,
    solve_by_concatenation,
    solve_nonexpansive,
    threshold_constant,
)

__all__ = [
    "AdaptedProcess",
    "BoundedIntegralGenerator",
    "BoundedLipschitzGenerator",
    "BseSolution",
    "BudgetError",
    "CheckReport",
    "CondNorm",
    "ConfigError",
    "ContractionBudget",
    "ConvergenceError",
    "Decomposition",
    "DegenerateDriverError",
    "DelayedGenerator",
    "DimensionError",
    "EventPartition",
    "FilteredSpace",
    "G0_fixed_point_check",
    "G0_map",
    "GDriver",
    "G_map",
    "GeneratorSpec",
    "IntegralGenerator",
    "L0Value",
    "L0bseError",
    "LeftSumGenerator",
    "MartingaleProcess",
    "MeasurabilityError",
    "NonexpansiveResult",
    "ParameterError",
    "Partition",
    "PartitionError",
    "PathFunctionalGenerator",
    "PointwiseGenerator",
    "PropertyError",
    "RandomIterCount",
    "RandomMeasure",
    "SelfMapError",
    "SolveReport",
    "SpaceError",
    "ZUGenerator",
    "ZeroGenerator",
    "basis_drivers",
    "block_average",
    "brute_force_oracle",
    "bse_residual",
    "build_space",
    "concatenate",
    "cond_expect",
    "cond_inner",
    "cond_norm",
    "doob_constant",
    "enumerate_counterexample_solutions",
    "fixed_point_random_contraction",
    "g_expectation",
    "g_risk_measure",
    "g_stability_check",
    "generator_stability_check",
    "glue",
    "is_measurable",
    "iterate_generator",
    "iterate_random",
    "l0_inf",
    "l0_sup",
    "lipschitz_estimate_check",
    "make_generator",
    "martingale_decompose",
    "martingale_from_terminal",
    "phi",
    "pi",
    "risk_axioms_check",
    "solve_bse_contraction",
    "solve_bsde_delayed",
    "solve_bsde_integral",
    "solve_bsde_zu",
    "solve_by_concatenation",
    "solve_condition_S",
    "solve_nonexpansive",
    "sp_norm",
    "stochastic_integral",
    "threshold_constant",
    "tilted_expectation",
]
