# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Test the randomized property suites"""

import functools

import pytest

from l0bse.probspace import cond_expect, random_value
from l0bse.reporting import CheckReport
from l0bse.solvers import solve_nonexpansive
from l0bse.verify import SUITES, counterexample_mann_check, run_suite


@pytest.mark.parametrize("name", [pytest.param(name, id=name) for name in SUITES])
def test_suite_passes_on_minimal_sizes(name):
    reports = run_suite(name, seed=1)
    assert reports
    for report in reports:
        assert report.passed, (report.name, report.violations)


def test_suites_are_reproducible():
    first = [r.as_dict() for r in run_suite("doob", seed=5, cases=3)]
    second = [r.as_dict() for r in run_suite("doob", seed=5, cases=3)]
    assert first == second


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")


def test_nonexpansive_suite_covers_the_counterexample():
    reports = {r.name: r for r in run_suite("nonexpansive", seed=2, cases=10)}
    assert reports["counterexample family"].cases == 5
    assert reports["counterexample fixed points"].cases == 5
    assert reports["distinct counterexample solutions"].cases == 1
    assert reports["counterexample mann"].cases == 2
    assert all(report.passed for report in reports.values())


def test_counterexample_mann_check(two_blocks, rng):
    raw = random_value(two_blocks, rng)
    xi = raw - cond_expect(raw, 0)
    start = xi + random_value(two_blocks, rng)
    report = counterexample_mann_check(xi, start, rng=rng, label="run")
    assert report.passed
    assert report.cases == 2
    assert report.worst < 1e-12
    assert not report.inconclusive


def test_stalled_mann_run_is_inconclusive(two_blocks, rng, monkeypatch):
    raw = random_value(two_blocks, rng)
    xi = raw - cond_expect(raw, 0)
    monkeypatch.setattr(
        "l0bse.verify.solve_nonexpansive", functools.partial(solve_nonexpansive, max_iter=1)
    )
    report = counterexample_mann_check(xi, xi + random_value(two_blocks, rng), label="run")
    assert report.passed
    assert report.inconclusive == ["run: no convergence"]
    assert report.as_dict()["inconclusive"] == ["run: no convergence"]


def test_check_report_merges_inconclusive_samples():
    first = CheckReport(name="mann")
    first.mark_inconclusive("a")
    second = CheckReport(name="mann")
    second.check(1.0, "b")
    first.merge(second)
    assert first.cases == 2
    assert first.inconclusive == ["a"]
    assert not first.passed
