# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test the command line front end"""

import csv
import json

import pytest

from l0bse.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, main

ZERO_RUN = """
seed = 3

[space]
branching = [2, 2]
base_branching = 2

[generator]
kind = "zero"

[terminal]
expression = "walk"

[solver]
method = "contraction"
contraction = {contraction}
"""

INTEGRAL_RUN = """
[space]
branching = [2, 2, 2]

[generator]
kind = "integral"
h = 0.5
a = 0.1

[terminal]
expression = "call"

[solver]
method = "integral"
max_iter = 1
"""

ZU_RUN = """
[space]
branching = [3, 3]
marks = 1

[generator]
kind = "zu"
h = 0.1
m = 0.05
nu = [0.02]

[terminal]
expression = "walk"

[solver]
method = "zu"
"""


def _write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def _output(capsys) -> str:
    return " ".join(capsys.readouterr().out.split())


def test_solve_writes_solution_and_report(tmp_path):
    config = _write(tmp_path, ZERO_RUN.format(contraction="0.0"))
    out = tmp_path / "out"
    assert main(["solve", "--config", str(config), "--out", str(out)]) == EXIT_OK
    solution = (out / "solution.csv").read_text()
    lines = solution.splitlines()
    assert lines[0].startswith("time,atom,Y0,M0")
    assert len(lines) == 3 * 8 + 1
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "converged"
    assert report["seed"] == 3
    # Reruns with the same seed reproduce the files.
    first_report = (out / "report.json").read_text()
    assert main(["solve", "--config", str(config), "--out", str(out)]) == EXIT_OK
    assert (out / "solution.csv").read_text() == solution
    assert (out / "report.json").read_text() == first_report


def test_solve_reports_budget_violations(tmp_path, capsys):
    config = _write(tmp_path, ZERO_RUN.format(contraction="[0.1, 0.3]"))
    assert main(["solve", "--config", str(config), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "base block 1" in _output(capsys)
    assert not (tmp_path / "solution.csv").exists()


@pytest.mark.parametrize(
    "text",
    [
        pytest.param(None, id="missing-file"),
        pytest.param(ZERO_RUN.replace("contraction = {contraction}\n", ""), id="no-contraction"),
        pytest.param(ZERO_RUN.format(contraction='"x"'), id="bad-contraction"),
    ],
)
def test_solve_configuration_errors(tmp_path, capsys, text):
    config = tmp_path / "run.toml" if text is None else _write(tmp_path, text)
    assert main(["solve", "--config", str(config)]) == EXIT_ERROR
    assert "error" in _output(capsys)


def test_solve_without_convergence(tmp_path, capsys):
    config = _write(tmp_path, INTEGRAL_RUN)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(config), "--out", str(out)]) == EXIT_NOT_CONVERGED
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "not converged"
    assert report["report"]["iterations"] == 1
    assert not (out / "solution.csv").exists()
    assert "not converged" in _output(capsys)


def test_solve_writes_decomposition_columns(tmp_path):
    config = _write(tmp_path, ZU_RUN)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(config), "--out", str(out)]) == EXIT_OK
    with open(out / "solution.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["time", "atom", "Y0", "M0", "Z0", "U0_0", "K0"]
    # Coefficients are not defined on the terminal time, the last 9 rows.
    assert all(row[4] != "" for row in rows[1:-9])
    assert all(row[4:6] == ["", ""] for row in rows[-9:])


def test_verify_writes_summary(tmp_path, capsys):
    assert main(["verify", "--suite", "doob", "--cases", "3", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "verify.json").read_text())
    assert summary["suite"] == "doob"
    assert summary["passed"] is True
    assert all(check["passed"] for check in summary["checks"])
    assert "pass" in _output(capsys)


def test_verify_rejects_unknown_suites(capsys):
    assert main(["verify", "--suite", "nope"]) == EXIT_ERROR
    assert "unknown suite" in _output(capsys)


def test_demo(tmp_path):
    assert main(["demo", "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "counterexample.csv", newline="") as f:
        header = next(csv.reader(f))
    assert header[:3] == ["member", "time", "atom"]
    report = json.loads((tmp_path / "counterexample.json").read_text())
    assert len(report["report"]["members"]) == 5
    assert json.loads((tmp_path / "contraction.json").read_text())["status"] == "converged"
