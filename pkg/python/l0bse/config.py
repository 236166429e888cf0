# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Run configurations read from TOML documents.

A configuration describes a space, a generator, a terminal condition, a solver
and where to write the results. Every validation failure raises a
:class:`ConfigError` naming the dotted path of the offending field.

"""

import tomllib
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
from atom.api import Atom, Dict, Int

from .bsecore import GeneratorSpec
from .errors import ConfigError, L0bseError
from .generators import make_generator
from .probspace import FilteredSpace, L0Value, block_average, build_space
from .processes import basis_drivers

SECTIONS = ("space", "generator", "terminal", "solver", "output")

SOLVER_METHODS = (
    "contraction",
    "integral",
    "zu",
    "delayed",
    "nonexpansive",
    "counterexample",
    "concatenation",
    "oracle",
)

TERMINAL_EXPRESSIONS = (
    "walk",
    "walk_max",
    "walk_squared",
    "call",
    "digital",
    "centered_walk",
)


def _number(value: Any, field: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(field, f"expected a positive number, got {value!r}")
    return float(value)


def _integer(value: Any, field: str, *, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(field, f"expected an integer >= {minimum}, got {value}")
    return value


def _numbers(value: Any, field: str) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(field, f"expected a list of numbers, got {value!r}")
    return [_number(v, f"{field}[{i}]") for i, v in enumerate(value)]


def _scalar_or_blocks(value: Any, field: str) -> float | list[float]:
    if isinstance(value, list):
        return _numbers(value, field)
    return _number(value, field)


class RunConfig(Atom):
    """Parsed run configuration.

    Sections are kept as plain mappings and validated when the corresponding
    object is built, so errors name the field that failed.

    """

    #: Seed of the sampled checks.
    seed = Int(0)

    space = Dict()
    generator = Dict()
    terminal = Dict()
    solver = Dict()
    output = Dict()

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        """Read a TOML configuration file.

        Raises
        ------
        ConfigError
            If the file cannot be read or parsed, or holds unknown sections.

        """
        try:
            with open(path, "rb") as f:
                document = tomllib.load(f)
        except OSError as e:
            raise ConfigError("<file>", f"cannot read {path}: {e.strerror}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError("<document>", str(e)) from e
        return cls.from_mapping(document)

    @classmethod
    def from_mapping(cls, document: Mapping[str, Any]) -> "RunConfig":
        unknown = sorted(set(document) - set(SECTIONS) - {"seed"})
        if unknown:
            raise ConfigError(unknown[0], f"unknown section, expected one of {SECTIONS}")
        sections = {}
        for name in SECTIONS:
            section = document.get(name, {})
            if not isinstance(section, Mapping):
                raise ConfigError(name, "expected a table")
            sections[name] = dict(section)
        seed = _integer(document.get("seed", 0), "seed")
        config = cls(seed=seed, **sections)
        config.validate()
        return config

    def with_overrides(
        self, *, tol: float | None = None, seed: int | None = None, out: str | None = None
    ) -> "RunConfig":
        """Copy of the configuration with command line values applied."""
        solver = dict(self.solver)
        output = dict(self.output)
        if tol is not None:
            solver["tol"] = tol
        if out is not None:
            output["directory"] = out
        config = RunConfig(
            seed=self.seed if seed is None else seed,
            space=dict(self.space),
            generator=dict(self.generator),
            terminal=dict(self.terminal),
            solver=solver,
            output=output,
        )
        config.validate()
        return config

    def validate(self) -> None:
        """Check the fields that do not need a space to be interpreted."""
        if "branching" not in self.space:
            raise ConfigError("space.branching", "missing")
        if self.method not in SOLVER_METHODS:
            raise ConfigError(
                "solver.method",
                f"unknown method {self.method!r}, expected one of {SOLVER_METHODS}",
            )
        for name in ("tol", "max_iter", "p", "t0"):
            getattr(self, name)
        if self.method != "counterexample" and "kind" not in self.generator:
            raise ConfigError("generator.kind", "missing")

    # --- Solver settings

    @property
    def method(self) -> str:
        method = self.solver.get("method", "contraction")
        if not isinstance(method, str):
            raise ConfigError("solver.method", f"expected a string, got {method!r}")
        return method

    @property
    def tol(self) -> float:
        return _number(self.solver.get("tol", 1e-8), "solver.tol", positive=True)

    @property
    def max_iter(self) -> int:
        return _integer(self.solver.get("max_iter", 1000), "solver.max_iter", minimum=1)

    @property
    def p(self) -> float:
        value = self.solver.get("p", 2.0)
        if value == "inf":
            return float("inf")
        p = _number(value, "solver.p")
        if not p > 1:
            raise ConfigError("solver.p", f"expected p > 1, got {p}")
        return p

    @property
    def t0(self) -> int:
        return _integer(self.solver.get("t0", 0), "solver.t0")

    @property
    def lam(self) -> float:
        lam = _number(self.solver.get("lambda", 0.5), "solver.lambda", positive=True)
        if lam > 1:
            raise ConfigError("solver.lambda", f"expected a weight in (0, 1], got {lam}")
        return lam

    def solver_value(self, key: str) -> float | list[float] | None:
        """Optional number or per base block list of the solver section."""
        if key not in self.solver:
            return None
        return _scalar_or_blocks(self.solver[key], f"solver.{key}")

    def samples(self) -> list[float | list[float]]:
        """Initial values Y_0 listed for the counterexample."""
        values = self.solver.get("y0", [0.0, 1.0, -1.0, 2.0, 0.5])
        if not isinstance(values, list) or not values:
            raise ConfigError("solver.y0", "expected a non empty list")
        return [_scalar_or_blocks(v, f"solver.y0[{i}]") for i, v in enumerate(values)]

    # --- Output

    @property
    def directory(self) -> Path:
        return Path(self.output.get("directory", "."))

    @property
    def solution_name(self) -> str:
        return str(self.output.get("solution", "solution.csv"))

    @property
    def report_name(self) -> str:
        return str(self.output.get("report", "report.json"))

    # --- Builders

    def build_space(self) -> FilteredSpace:
        section = self.space
        known = {
            "branching",
            "probabilities",
            "base_branching",
            "base_probabilities",
            "marks",
            "horizon",
        }
        unknown = sorted(set(section) - known)
        if unknown:
            raise ConfigError(f"space.{unknown[0]}", "unknown field")
        branching = section["branching"]
        if not isinstance(branching, list) or not branching:
            raise ConfigError("space.branching", "expected a non empty list of integers")
        branching = [
            _integer(b, f"space.branching[{i}]", minimum=1) for i, b in enumerate(branching)
        ]
        probabilities = section.get("probabilities")
        if probabilities is not None:
            if not isinstance(probabilities, list):
                raise ConfigError("space.probabilities", "expected a list of lists")
            probabilities = [
                _numbers(row, f"space.probabilities[{i}]") for i, row in enumerate(probabilities)
            ]
        base_probabilities = section.get("base_probabilities")
        if base_probabilities is not None:
            base_probabilities = _numbers(base_probabilities, "space.base_probabilities")
        try:
            return build_space(
                branching,
                probabilities,
                base_branching=_integer(
                    section.get("base_branching", 1), "space.base_branching", minimum=1
                ),
                base_probabilities=base_probabilities,
                marks=_integer(section.get("marks", 0), "space.marks"),
                horizon=_number(section.get("horizon", 1.0), "space.horizon", positive=True),
            )
        except L0bseError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError("space", str(e)) from e

    def build_generator(self, space: FilteredSpace) -> GeneratorSpec:
        parameters = dict(self.generator)
        kind = parameters.pop("kind", None)
        if not isinstance(kind, str):
            raise ConfigError("generator.kind", f"expected a string, got {kind!r}")
        try:
            return make_generator(kind, space, **parameters)
        except L0bseError as e:
            raise ConfigError("generator", str(e)) from e

    def build_terminal(self, space: FilteredSpace) -> L0Value:
        """Terminal condition, glued along the base blocks when per_block is set."""
        parts = self.terminal_parts(space)
        values = np.zeros((space.n_atoms, parts[0][1].dim))
        for mask, xi in parts:
            values[mask] = xi.values[mask]
        return L0Value(space, values)

    def terminal_parts(self, space: FilteredSpace) -> list[tuple[np.ndarray, L0Value]]:
        """One (base block mask, terminal condition) pair per per_block entry.

        Without per_block, a single pair covering every atom.

        """
        section = self.terminal
        if "per_block" not in section:
            return [(np.ones(space.n_atoms, dtype=bool), _terminal(space, section, "terminal"))]
        tables = section["per_block"]
        if not isinstance(tables, list) or len(tables) != space.base.n_blocks:
            raise ConfigError(
                "terminal.per_block",
                f"expected one table per base block ({space.base.n_blocks})",
            )
        parts = []
        for b, table in enumerate(tables):
            field = f"terminal.per_block[{b}]"
            if not isinstance(table, Mapping):
                raise ConfigError(field, "expected a table")
            parts.append((space.base.labels == b, _terminal(space, table, field)))
        return parts


def _terminal(space: FilteredSpace, section: Mapping[str, Any], field: str) -> L0Value:
    if "values" in section:
        values = _numbers(section["values"], f"{field}.values")
        if len(values) != space.n_atoms:
            raise ConfigError(
                f"{field}.values", f"expected {space.n_atoms} values, got {len(values)}"
            )
        terminal = np.asarray(values)
    else:
        expression = section.get("expression", "walk")
        if expression not in TERMINAL_EXPRESSIONS:
            raise ConfigError(
                f"{field}.expression",
                f"unknown expression {expression!r}, expected one of {TERMINAL_EXPRESSIONS}",
            )
        walk = basis_drivers(space)[0].values[..., 0]
        strike = _number(section.get("strike", 0.0), f"{field}.strike")
        terminal = {
            "walk": lambda: walk[-1],
            "walk_max": lambda: walk.max(axis=0),
            "walk_squared": lambda: walk[-1] ** 2,
            "call": lambda: np.maximum(walk[-1] - strike, 0.0),
            "digital": lambda: (walk[-1] > strike).astype(float),
            "centered_walk": lambda: walk[-1] - block_average(space, walk[-1], 0),
        }[expression]()
    terminal = _number(section.get("scale", 1.0), f"{field}.scale") * terminal
    terminal = terminal + _number(section.get("offset", 0.0), f"{field}.offset")
    if section.get("center", False):
        terminal = terminal - block_average(space, terminal, 0)
    return L0Value(space, terminal)
