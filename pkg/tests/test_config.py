# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test reading and validating run configurations"""

import math

import numpy as np
import pytest

from l0bse.config import RunConfig
from l0bse.errors import ConfigError
from l0bse.generators import IntegralGenerator
from l0bse.probspace import block_average

DOCUMENT = """
seed = 7

[space]
branching = [2, 2]
base_branching = 2

[generator]
kind = "integral"
h = [0.5, -0.5]
a = 0.1

[terminal]
expression = "call"
strike = 0.1

[solver]
method = "integral"
tol = 1e-9
p = "inf"

[output]
directory = "results"
"""


def test_read_toml_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(DOCUMENT)
    config = RunConfig.from_file(path)
    assert config.seed == 7
    assert config.method == "integral"
    assert config.tol == 1e-9
    assert math.isinf(config.p)
    assert config.max_iter == 1000
    assert config.directory.name == "results"
    assert config.report_name == "report.json"
    space = config.build_space()
    assert space.n_atoms == 8
    F = config.build_generator(space)
    assert isinstance(F, IntegralGenerator)
    assert F.h.scalar.tolist() == [0.5] * 4 + [-0.5] * 4
    xi = config.build_terminal(space)
    assert np.all(xi.scalar >= 0.0)


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.from_file(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[space\nbranching = 2")
    with pytest.raises(ConfigError) as e:
        RunConfig.from_file(broken)
    assert e.value.field == "<document>"


@pytest.mark.parametrize(
    "document, field",
    [
        pytest.param({"space": {}}, "space.branching", id="branching"),
        pytest.param(
            {"space": {"branching": [2]}, "generator": {"kind": "zero"}, "solver": {"method": "newton"}},
            "solver.method",
            id="method",
        ),
        pytest.param(
            {"space": {"branching": [2]}, "generator": {"kind": "zero"}, "solver": {"tol": -1.0}},
            "solver.tol",
            id="tol",
        ),
        pytest.param(
            {"space": {"branching": [2]}, "generator": {"kind": "zero"}, "solver": {"p": 1}},
            "solver.p",
            id="p",
        ),
        pytest.param({"space": {"branching": [2]}}, "generator.kind", id="kind"),
        pytest.param(
            {"space": {"branching": [2]}, "generator": {"kind": "zero"}, "extra": {}},
            "extra",
            id="section",
        ),
        pytest.param(
            {"space": {"branching": [2]}, "generator": {"kind": "zero"}, "seed": "x"},
            "seed",
            id="seed",
        ),
    ],
)
def test_invalid_documents_name_the_field(document, field):
    with pytest.raises(ConfigError) as e:
        RunConfig.from_mapping(document)
    assert e.value.field == field


@pytest.mark.parametrize(
    "space, field",
    [
        pytest.param({"branching": [2, "x"]}, "space.branching[1]", id="branching"),
        pytest.param({"branching": [2], "depth": 3}, "space.depth", id="unknown"),
        pytest.param({"branching": [2], "horizon": 0}, "space.horizon", id="horizon"),
        pytest.param(
            {"branching": [2], "probabilities": [[0.5, 0.6]]}, "space", id="probabilities"
        ),
    ],
)
def test_invalid_spaces(space, field):
    config = RunConfig.from_mapping({"space": space, "generator": {"kind": "zero"}})
    with pytest.raises(ConfigError) as e:
        config.build_space()
    assert e.value.field == field


def test_invalid_generators():
    config = RunConfig.from_mapping(
        {"space": {"branching": [2]}, "generator": {"kind": "integral", "q": 1.0}}
    )
    with pytest.raises(ConfigError, match="Invalid parameters") as e:
        config.build_generator(config.build_space())
    assert e.value.field == "generator"


def test_overrides():
    config = RunConfig.from_mapping({"space": {"branching": [2]}, "generator": {"kind": "zero"}})
    changed = config.with_overrides(tol=1e-4, seed=3, out="elsewhere")
    assert changed.tol == 1e-4
    assert changed.seed == 3
    assert str(changed.directory) == "elsewhere"
    assert config.tol == 1e-8
    with pytest.raises(ConfigError, match="solver.tol"):
        config.with_overrides(tol=0.0)


@pytest.mark.parametrize(
    "terminal, expected",
    [
        pytest.param({"expression": "walk"}, [1.0, 0.0, 0.0, -1.0], id="walk"),
        pytest.param({"expression": "walk_squared"}, [1.0, 0.0, 0.0, 1.0], id="squared"),
        pytest.param({"expression": "walk_max"}, [1.0, 0.5, 0.0, 0.0], id="max"),
        pytest.param({"expression": "digital", "strike": 0.5}, [1.0, 0.0, 0.0, 0.0], id="digital"),
        pytest.param(
            {"expression": "call", "scale": 2.0, "offset": 1.0}, [3.0, 1.0, 1.0, 1.0], id="call"
        ),
        pytest.param({"values": [1.0, 2.0, 3.0, 4.0], "center": True}, [-1.5, -0.5, 0.5, 1.5], id="values"),
    ],
)
def test_terminal_expressions(terminal, expected):
    # Two steps of length 1/4 move the walk by +-1/2.
    config = RunConfig.from_mapping(
        {
            "space": {"branching": [2, 2], "horizon": 0.5},
            "generator": {"kind": "zero"},
            "terminal": terminal,
        }
    )
    space = config.build_space()
    assert config.build_terminal(space).scalar.tolist() == pytest.approx(expected)


def test_per_block_terminal():
    config = RunConfig.from_mapping(
        {
            "space": {"branching": [2], "base_branching": 2},
            "generator": {"kind": "zero"},
            "terminal": {
                "per_block": [{"expression": "centered_walk"}, {"values": [0.0, 0.0, 5.0, 7.0]}]
            },
        }
    )
    space = config.build_space()
    parts = config.terminal_parts(space)
    assert [mask.tolist() for mask, _ in parts] == [
        [True, True, False, False],
        [False, False, True, True],
    ]
    xi = config.build_terminal(space)
    assert xi.scalar[2:].tolist() == [5.0, 7.0]
    assert np.allclose(block_average(space, xi.values, 0)[:2], 0.0)


@pytest.mark.parametrize(
    "terminal, field",
    [
        pytest.param({"expression": "put"}, "terminal.expression", id="expression"),
        pytest.param({"values": [1.0]}, "terminal.values", id="values"),
        pytest.param({"per_block": [{}]}, "terminal.per_block", id="per-block"),
        pytest.param(
            {"per_block": [{}, {"strike": "x"}]}, "terminal.per_block[1].strike", id="nested"
        ),
    ],
)
def test_invalid_terminals(terminal, field):
    config = RunConfig.from_mapping(
        {
            "space": {"branching": [2], "base_branching": 2},
            "generator": {"kind": "zero"},
            "terminal": terminal,
        }
    )
    with pytest.raises(ConfigError) as e:
        config.build_terminal(config.build_space())
    assert e.value.field == field


def test_solver_values():
    config = RunConfig.from_mapping(
        {
            "space": {"branching": [2]},
            "solver": {"method": "counterexample", "contraction": [0.1, 0.05], "y0": [1, [2, 3]]},
        }
    )
    assert config.solver_value("contraction") == [0.1, 0.05]
    assert config.solver_value("radius") is None
    assert config.samples() == [1.0, [2.0, 3.0]]
    assert config.lam == 0.5
