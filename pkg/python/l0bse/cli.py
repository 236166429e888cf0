# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Command line front end.

Examples:
    l0bse solve --config run.toml --out results
    l0bse verify --suite doob --cases 500
    l0bse verify --suite all
    l0bse demo --out tutorial

Exit codes: 0 on success, 1 on configuration errors or failed checks, 2 when
a solver reports non convergence.

"""

import argparse
import csv
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
from atom.api import Atom, Dict, List, Str
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from .bsecore import BseSolution
from .config import RunConfig
from .errors import BudgetError, ConfigError, ConvergenceError, L0bseError, SelfMapError
from .generators import BoundedLipschitzGenerator
from .probspace import L0Value, block_average
from .reporting import CheckReport, SolveReport
from .rnmodule import CondNorm, RandomIterCount
from .solvers import (
    ContractionBudget,
    brute_force_oracle,
    counterexample_generator,
    enumerate_counterexample_solutions,
    solve_bse_contraction,
    solve_bsde_delayed,
    solve_bsde_integral,
    solve_bsde_zu,
    solve_by_concatenation,
    solve_nonexpansive,
)
from .verify import SUITES, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def configure_logging(verbosity: int) -> None:
    """Route the package logs to a rich handler on stderr."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    handler = RichHandler(
        console=Console(stderr=True), show_time=False, show_path=False, markup=False
    )
    package = logging.getLogger("l0bse")
    package.handlers[:] = [handler]
    package.setLevel(level)
    package.propagate = False


class RunOutcome(Atom):
    """Solutions and structured report of one configured run."""

    method = Str()

    solutions = List(BseSolution)

    #: Labels of the solutions, one per CSV member.
    labels = List(str)

    report = Dict()

    status = Str("converged")

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _budget(config: RunConfig, space) -> ContractionBudget:
    coefficient = config.solver_value("contraction")
    if coefficient is None:
        raise ConfigError("solver.contraction", "missing, the method needs a coefficient")
    iterations = config.solver.get("iterations", 1)
    try:
        counts = (
            RandomIterCount.from_blocks(space, iterations)
            if isinstance(iterations, list)
            else RandomIterCount(space, iterations)
        )
    except L0bseError as e:
        raise ConfigError("solver.iterations", str(e)) from e
    return ContractionBudget(space, coefficient, p=config.p, counts=counts)


def _outcome(method: str, solution: BseSolution, report: SolveReport) -> RunOutcome:
    return RunOutcome(
        method=method,
        solutions=[solution],
        labels=["solution"],
        report=report.as_dict(),
        status=report.status,
    )


def execute(config: RunConfig) -> RunOutcome:
    """Run the solver selected by a configuration.

    Raises
    ------
    ConfigError
        If a field cannot be interpreted.
    BudgetError
        If the contraction budget or an admissibility condition fails.
    ConvergenceError
        If the solver does not converge.

    """
    space = config.build_space()
    xi = config.build_terminal(space)
    method = config.method
    if method == "counterexample":
        centered = xi - L0Value(space, block_average(space, xi.values, 0))
        F = counterexample_generator(space)
        solutions = enumerate_counterexample_solutions(centered, F.a, config.samples())
        return RunOutcome(
            method=method,
            solutions=solutions,
            labels=[f"member {i}" for i in range(len(solutions))],
            report={
                "label": "counterexample",
                "status": "converged",
                "members": [
                    {"y0": _listing(s.Y.values[0]), "residual": s.residual}
                    for s in solutions
                ],
            },
        )

    F = config.build_generator(space)
    tol, max_iter, base = config.tol, config.max_iter, config.t0
    if method == "contraction":
        solution, report = solve_bse_contraction(
            F, xi, _budget(config, space), tol, max_iter, base=base,
            rng=np.random.default_rng(config.seed),
        )
    elif method == "integral":
        solution, report = solve_bsde_integral(
            _expect(F, "integral"), xi, config.p, tol, max_iter, base=base,
            bound_samples=4, rng=np.random.default_rng(config.seed),
        )
    elif method == "zu":
        solution, report = solve_bsde_zu(
            _expect(F, "pointwise", "zu"), xi, tol, max_iter,
            C=config.solver_value("contraction"), base=base,
        )
    elif method == "delayed":
        solution, report = solve_bsde_delayed(_expect(F, "delayed"), xi, tol, max_iter, base=base)
    elif method == "oracle":
        solution = brute_force_oracle(_expect(F, "pointwise", "zu"), xi)
        report = SolveReport(
            label="oracle", status="converged", solution_residual=solution.residual
        )
    elif method == "concatenation":
        parts = config.terminal_parts(space)
        solution, report = solve_by_concatenation(
            F, parts, _budget(config, space), tol, max_iter
        )
    else:
        radius = config.solver_value("radius")
        norm = CondNorm(space, config.p, base)
        if radius is None:
            if not isinstance(F, BoundedLipschitzGenerator):
                raise ConfigError("solver.radius", "missing, the generator has no default ball")
            radius = norm(xi) + F.bound * F.scale
        result = solve_nonexpansive(
            F, xi, L0Value.constant(space, 0.0, xi.dim), radius, config.lam, tol,
            max_iter, p=config.p, base=base, rng=np.random.default_rng(config.seed),
        )
        outcome = RunOutcome(
            method=method,
            solutions=[] if result.solution is None else [result.solution],
            labels=["solution"] if result.solution is not None else [],
            report={**result.report.as_dict(), "monitor": result.monitor.as_dict()},
            status=result.status,
        )
        return outcome
    return _outcome(method, solution, report)


def _expect(F, *kinds: str):
    if F.kind not in kinds:
        raise ConfigError(
            "generator.kind", f"the solver needs a generator of kind {' or '.join(kinds)}"
        )
    return F


def _listing(values: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(values).reshape(-1)]


def _number(value: float) -> str:
    return format(float(value), ".17g")


def write_solution_csv(path: Path, outcome: RunOutcome) -> None:
    """One row per (time, atom) with Y, M and, when available, Z, U and K."""
    if not outcome.solutions:
        return
    first = outcome.solutions[0]
    space, d = first.space, first.Y.dim
    decomposition = first.decomposition
    header = ["time", "atom"]
    if len(outcome.solutions) > 1:
        header.insert(0, "member")
    header += [f"Y{j}" for j in range(d)] + [f"M{j}" for j in range(d)]
    if decomposition is not None:
        n_marks = decomposition.u.shape[2]
        header += [f"Z{j}" for j in range(d)]
        header += [f"U{x}_{j}" for x in range(n_marks) for j in range(d)]
        header += [f"K{j}" for j in range(d)]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for label, solution in zip(outcome.labels, outcome.solutions):
            dec = solution.decomposition
            for k in range(space.n_steps + 1):
                for a, atom in enumerate(space.atoms):
                    row = [_number(space.grid[k]), atom]
                    if len(outcome.solutions) > 1:
                        row.insert(0, label)
                    row += [_number(v) for v in solution.Y.values[k, a]]
                    row += [_number(v) for v in solution.M.values[k, a]]
                    if dec is not None:
                        if k < space.n_steps:
                            row += [_number(v) for v in dec.z[k, a]]
                            row += [_number(v) for v in dec.u[k, a].reshape(-1)]
                        else:
                            row += [""] * (d + dec.u.shape[2] * d)
                        row += [_number(v) for v in dec.remainder.values[k, a]]
                    writer.writerow(row)


def write_report(path: Path, document: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _print_solve_summary(console: Console, outcome: RunOutcome) -> None:
    report = outcome.report
    summary = Text()
    summary.append(outcome.method, style="bold")
    summary.append(f": {outcome.status}")
    if "iterations" in report:
        summary.append(f" after {report['iterations']} iterations")
    if report.get("solution_residual") is not None:
        summary.append(f", residual {report['solution_residual']:.3e}")
    console.print(Panel(summary, title="Solve", expand=False))
    if report.get("block_residuals"):
        table = Table(show_header=True, header_style="bold cyan")
        table.add_column("Block", style="green")
        table.add_column("L / k", justify="right")
        table.add_column("Residual", justify="right")
        table.add_column("Worst ratio", justify="right")
        table.add_column("Bound", justify="right")
        counts = report.get("iteration_counts") or []
        ratios = report.get("worst_ratios") or []
        bounds = report.get("bounds") or []
        for b, residual in enumerate(report["block_residuals"]):
            table.add_row(
                str(b),
                str(counts[b]) if b < len(counts) else "",
                f"{residual:.3e}",
                "" if b >= len(ratios) or ratios[b] is None else f"{ratios[b]:.4f}",
                f"{bounds[b]:.4f}" if b < len(bounds) else "",
            )
        console.print(table)
    for member in report.get("members", []):
        console.print(f"Y0 = {member['y0']}  residual {member['residual']:.3e}")
    for flag in report.get("flags", []):
        console.print(f"[yellow]flag[/yellow] {flag}")


def cmd_solve(config: RunConfig, console: Console) -> int:
    try:
        outcome = execute(config)
    except (ConfigError, BudgetError, SelfMapError) as e:
        console.print(f"[red]error[/red] {e}")
        return EXIT_ERROR
    except ConvergenceError as e:
        console.print(f"[red]not converged[/red] {e}")
        document = {"method": config.method, "status": "not converged", "message": str(e)}
        if e.report is not None:
            document["report"] = e.report.as_dict()
        write_report(config.directory / config.report_name, document)
        return EXIT_NOT_CONVERGED
    except L0bseError as e:
        console.print(f"[red]error[/red] {e}")
        return EXIT_ERROR
    write_solution_csv(config.directory / config.solution_name, outcome)
    document = {
        "method": outcome.method,
        "seed": config.seed,
        "status": outcome.status,
        "report": outcome.report,
    }
    write_report(config.directory / config.report_name, document)
    _print_solve_summary(console, outcome)
    return EXIT_OK if outcome.converged else EXIT_NOT_CONVERGED


def _check_status(report: CheckReport) -> str:
    if not report.passed:
        return "[red]fail[/red]"
    if report.inconclusive:
        return f"[yellow]pass, {len(report.inconclusive)} inconclusive[/yellow]"
    return "[green]pass[/green]"


def cmd_verify(
    suite: str,
    seed: int,
    cases: int | None,
    full: bool,
    out: str | None,
    console: Console,
) -> int:
    if suite != "all" and suite not in SUITES:
        console.print(
            f"[red]error[/red] unknown suite {suite!r}, expected one of "
            f"{['all', *SUITES]}"
        )
        return EXIT_ERROR
    reports = run_suite(suite, seed, cases, full=full)
    table = Table(show_header=True, header_style="bold cyan")
    table.add_column("Identity", style="green")
    table.add_column("Cases", justify="right")
    table.add_column("Worst deviation", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Status")
    for report in reports:
        table.add_row(
            report.name,
            str(report.cases),
            f"{report.worst:.3e}",
            f"{report.tolerance:.1e}",
            _check_status(report),
        )
    console.print(table)
    passed = all(report.passed for report in reports)
    if out is not None:
        write_report(
            Path(out) / "verify.json",
            {
                "suite": suite,
                "seed": seed,
                "passed": passed,
                "checks": [report.as_dict() for report in reports],
            },
        )
    return EXIT_OK if passed else EXIT_ERROR


DEMO_CONFIGS: dict[str, dict[str, Any]] = {
    "counterexample": {
        "space": {"branching": [2, 2, 2], "base_branching": 2},
        "terminal": {"expression": "centered_walk"},
        "solver": {"method": "counterexample", "y0": [0.0, 1.0, -1.0, 2.0, [0.5, -0.5]]},
        "output": {"solution": "counterexample.csv", "report": "counterexample.json"},
    },
    "contraction": {
        "space": {"branching": [2, 2, 2, 2], "base_branching": 2},
        "generator": {"kind": "integral", "h": [0.5, -0.5], "a": [0.05, 0.1], "c": 0.05},
        "terminal": {"expression": "call", "strike": 0.0},
        "solver": {"method": "integral", "tol": 1e-10},
        "output": {"solution": "contraction.csv", "report": "contraction.json"},
    },
}


def cmd_demo(seed: int, out: str | None, console: Console) -> int:
    """Counterexample family listing followed by one contraction solve."""
    code = EXIT_OK
    for name, document in DEMO_CONFIGS.items():
        console.rule(name)
        config = RunConfig.from_mapping({**document, "seed": seed}).with_overrides(out=out)
        if out is None:
            outcome = execute(config)
            _print_solve_summary(console, outcome)
            code = max(code, EXIT_OK if outcome.converged else EXIT_NOT_CONVERGED)
        else:
            code = max(code, cmd_solve(config, console))
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="l0bse", description="Solve and verify backward stochastic equations."
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    subparsers = parser.add_subparsers(dest="command", required=True)

    solve = subparsers.add_parser("solve", help="Run a configured solver.")
    solve.add_argument("--config", required=True, help="TOML run configuration.")
    solve.add_argument("--tol", type=float, default=None, help="Override solver.tol.")
    solve.add_argument("--seed", type=int, default=None, help="Override the seed.")
    solve.add_argument("--out", default=None, help="Output directory.")

    verify = subparsers.add_parser("verify", help="Run a property suite.")
    verify.add_argument("--suite", default="all", help="Suite name or all.")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--cases", type=int, default=None, help="Cases per suite.")
    verify.add_argument(
        "--full", action="store_true", help="Run the full case counts instead of the minimal ones."
    )
    verify.add_argument("--out", default=None, help="Directory of verify.json.")

    demo = subparsers.add_parser("demo", help="Run the tutorial configurations.")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--out", default=None, help="Output directory.")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    console = Console()
    if args.command == "verify":
        return cmd_verify(args.suite, args.seed, args.cases, args.full, args.out, console)
    if args.command == "demo":
        return cmd_demo(args.seed, args.out, console)
    try:
        config = RunConfig.from_file(args.config).with_overrides(
            tol=args.tol, seed=args.seed, out=args.out
        )
    except ConfigError as e:
        console.print(f"[red]error[/red] {e}")
        return EXIT_ERROR
    return cmd_solve(config, console)


if __name__ == "__main__":
    sys.exit(main())
