"""Command-line interface for twostop.

Usage:
    twostop table1 --diff                      # limiting-value table vs the golden one
    twostop converge --alpha 1 --n 10000       # dp sweep with sandwich residuals
    twostop sandwich --alpha 1 --n 5000 --j 32,64
    twostop simulate --alpha 1 --n 200 --trials 100000 --seed 42
    twostop moments --alpha 1 --r 3 --n 100000
    twostop asymptote --direction to_infinity --alphas 10,20,50

Reports go to ``--out`` (format from ``--format``) or to stdout. Logs go to
stderr. Exit status is 0 when every check passes, 1 when a check fails and 2
on invalid arguments.
"""

import logging
import math
import sys
from collections.abc import Callable
from enum import StrEnum
from pathlib import Path
from typing import Annotated, Any

import click
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from twostop.__about__ import __version__
from twostop.dist import PowerLawDist
from twostop.dp import (
    DpTrace,
    DpTraceList,
    GnGrid,
    dp_sweep,
    fn_hn,
    one_choice_values,
    prophet_value,
    sandwich_residuals,
)
from twostop.exceptions import InvariantViolation, TwoStopError
from twostop.golden import GOLDEN_COLUMNS, golden_deviation
from twostop.limits import TABLE1_ALPHAS, Direction, asymptote_check, table1
from twostop.models import Alpha, PositiveFloat, PositiveInt
from twostop.recursion import (
    Growth,
    classify_growth,
    moment_recursion,
    one_choice_thresholds,
    sandwich_bounds,
)
from twostop.reports import ReportFormat, write_report
from twostop.sim import Policy, PolicyTable, SimReport, run_one_choice, run_prophet, run_two_choice
from twostop.utils import parse_float_list

__all__ = ["Command", "RunConfig", "cli"]

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20040101
GOLDEN_TOLERANCE = 2e-3
DEFAULT_ASYMPTOTE_ALPHAS = {
    Direction.TO_INFINITY: [10.0, 20.0, 50.0, 100.0],
    Direction.TO_ZERO: [0.2, 0.1, 0.05, 0.02],
}


class Command(StrEnum):
    """Subcommands of ``twostop``."""

    TABLE1 = "table1"
    CONVERGE = "converge"
    SANDWICH = "sandwich"
    SIMULATE = "simulate"
    MOMENTS = "moments"
    ASYMPTOTE = "asymptote"


class RunConfig(BaseModel):
    """Validated parameters of one CLI invocation.

    Attributes:
        command: Subcommand to run.
        alphas: Shape parameters; single-alpha commands use the first.
        N: Last stage, horizon or recursion length.
        trials: Monte Carlo sequences per policy.
        seed: Root seed of every random stream.
        grid_size: Abscissae of the dp grid.
        output: Report path; None writes to stdout.
        report_format: csv or json.
        diff: Compare ``table1`` against the golden table.
        j_list: Lower sandwich indices.
        r: Moment order.
        direction: Asymptote direction.
        policy: Single policy to simulate; None runs all three.
        workers: Simulation threads.
    """

    model_config = ConfigDict(frozen=True)

    command: Command
    alphas: Annotated[list[Alpha], Field(min_length=1)] = [1.0]
    N: PositiveInt = 10_000
    trials: PositiveInt = 100_000
    seed: Annotated[int, Field(ge=0)] = DEFAULT_SEED
    grid_size: Annotated[int, Field(ge=512)] = 4096
    output: Path | None = None
    report_format: ReportFormat = ReportFormat.CSV
    diff: bool = False
    j_list: Annotated[list[PositiveInt], Field(min_length=1)] = [32, 64]
    r: PositiveFloat = 3.0
    direction: Direction = Direction.TO_INFINITY
    policy: Policy | None = None
    workers: Annotated[int, Field(ge=1, le=64)] = 1

    @property
    def alpha(self) -> float:
        """The first alpha."""
        return self.alphas[0]

    def to_args(self) -> list[str]:
        """The argument vector that reproduces this configuration."""
        args = [
            self.command.value,
            "--alphas",
            ",".join(repr(a) for a in self.alphas),
            "--n",
            str(self.N),
            "--trials",
            str(self.trials),
            "--seed",
            str(self.seed),
            "--grid-size",
            str(self.grid_size),
            "--format",
            self.report_format.value,
        ]
        if self.output is not None:
            args += ["--out", str(self.output)]
        extra: dict[Command, list[str]] = {
            Command.TABLE1: ["--diff"] if self.diff else [],
            Command.SANDWICH: ["--j", ",".join(map(str, self.j_list))],
            Command.SIMULATE: ["--workers", str(self.workers)]
            + (["--policy", self.policy.value] if self.policy else []),
            Command.MOMENTS: ["--r", repr(self.r)],
            Command.ASYMPTOTE: ["--direction", self.direction.value],
        }
        return args + extra.get(self.command, [])


def _common_options(func: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option("--alpha", type=float, default=None, help="Shape parameter alpha."),
        click.option("--alphas", default=None, help="Comma separated list of alphas."),
        click.option("--n", "N", type=int, default=None, help="Last stage or horizon."),
        click.option("--trials", type=int, default=None, help="Monte Carlo trials."),
        click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True, help="Root seed."),
        click.option("--grid-size", type=int, default=4096, show_default=True, help="dp grid size."),
        click.option("--out", "output", type=click.Path(dir_okay=False, path_type=Path), default=None),
        click.option(
            "--format",
            "report_format",
            type=click.Choice([f.value for f in ReportFormat]),
            default=ReportFormat.CSV.value,
            show_default=True,
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _config(command: Command, alpha: float | None, alphas: str | None, **params: Any) -> RunConfig:  # noqa: ANN401
    values = {key: value for key, value in params.items() if value is not None}
    if alphas is not None:
        try:
            values["alphas"] = parse_float_list(alphas)
        except ValueError as err:
            raise click.BadParameter(str(err), param_hint="--alphas") from None
    elif alpha is not None:
        values["alphas"] = [alpha]
    try:
        return RunConfig(command=command, **values)
    except ValidationError as err:
        raise click.UsageError(str(err)) from None


def _emit(config: RunConfig, records: list[dict[str, Any]], columns: list[str] | None = None) -> None:
    try:
        text = write_report(records, config.output, config.report_format, columns=columns)
    except OSError as err:
        raise click.FileError(str(config.output), hint=str(err)) from None
    if text is not None:
        click.echo(text, nl=False)


def _guarded(func: Callable[[RunConfig], None], config: RunConfig) -> None:
    try:
        func(config)
    except InvariantViolation as err:
        click.echo(f"check failed: {err.check}: {err.detail}", err=True)
        sys.exit(1)
    except TwoStopError as err:
        logger.debug("command failed", exc_info=True)
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    except ValueError as err:
        raise click.UsageError(str(err)) from None


@click.group()
@click.version_option(version=__version__, prog_name="twostop")
@click.option("-v", "--verbose", count=True, help="Repeat for more log output on stderr.")
def cli(verbose: int) -> None:
    """Numerics of the optimal two-choice stopping problem."""
    logging.basicConfig(
        level=max(logging.WARNING - 10 * verbose, logging.DEBUG),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run_table1(config: RunConfig) -> None:
    """Limiting constants per alpha, optionally diffed against the golden table."""
    rows = table1(config.alphas)
    _emit(config, [row.as_row() for row in rows], GOLDEN_COLUMNS)
    if not config.diff:
        return
    deviation = golden_deviation(rows)
    click.echo(deviation.to_string(index=False, float_format=lambda v: f"{v:.2e}"), err=True)
    worst = float(deviation[GOLDEN_COLUMNS[1:]].to_numpy().max()) if len(deviation) else 0.0
    click.echo(f"max deviation {worst:.3e}", err=True)
    if worst >= GOLDEN_TOLERANCE:
        raise InvariantViolation("golden_deviation", f"max deviation {worst:.3e} >= {GOLDEN_TOLERANCE}")


@cli.command("table1")
@_common_options
@click.option("--diff", is_flag=True, help="Print deviations from the golden table.")
def table1_command(alpha: float | None, alphas: str | None, **params: Any) -> None:  # noqa: ANN401
    """Reproduce the limiting-value table."""
    if alpha is None and alphas is None:
        alphas = ",".join(map(str, TABLE1_ALPHAS))
    _guarded(run_table1, _config(Command.TABLE1, alpha, alphas, **params))


def run_converge(config: RunConfig) -> None:
    """dp trace with sandwich residuals and spot values of ``f_n``, ``h_n`` at ``y = 1``."""
    alpha = config.alpha
    extras: list[dict[str, Any]] = []
    failures: list[int] = []

    def observe(grid: GnGrid, record: DpTrace) -> None:
        residuals = sandwich_residuals(alpha, grid)
        if not residuals.holds():
            failures.append(record.n)
        sampled = fn_hn(alpha, grid)
        extras.append(
            {
                "B_n_alpha": record.B_n**alpha,
                "f_n_at_1": float(np.interp(1.0, sampled.ys, sampled.f)),
                "h_n_at_1": float(np.interp(1.0, sampled.ys, sampled.h)),
                "min_eps": residuals.min_eps,
                "max_eps": residuals.max_eps,
                "max_excess": residuals.max_excess,
            }
        )

    trace = dp_sweep(alpha, config.N, config.grid_size, on_stage=observe)
    _emit(config, [row | extra for row, extra in zip(trace.records(), extras, strict=True)])
    if failures:
        raise InvariantViolation("sandwich_residuals", f"0 < f - f_n < y/(2n) fails at n={failures[:5]}")


@cli.command("converge")
@_common_options
def converge_command(alpha: float | None, alphas: str | None, **params: Any) -> None:  # noqa: ANN401
    """Run the dp sweep and write its trace."""
    _guarded(run_converge, _config(Command.CONVERGE, alpha, alphas, **params))


def run_sandwich(config: RunConfig) -> None:
    """Lower and upper recursion bounds around ``W_N``."""
    report = sandwich_bounds(config.alpha, config.j_list, config.N, grid_size=config.grid_size)
    _emit(config, report.records())


@cli.command("sandwich")
@_common_options
@click.option("--j", "j_list", default="32,64", show_default=True, help="Comma separated j values.")
def sandwich_command(alpha: float | None, alphas: str | None, j_list: str, **params: Any) -> None:  # noqa: ANN401
    """Check Z^-_j <= W_n <= Z^+ along the sweep."""
    try:
        js = [int(part) for part in j_list.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"{j_list!r} is not a list of integers", param_hint="--j") from None
    _guarded(run_sandwich, _config(Command.SANDWICH, alpha, alphas, j_list=js, **params))


def _exact_value(policy: Policy, alpha: float, n: int, two_choice: float | None) -> float:
    if policy is Policy.PROPHET:
        return prophet_value(alpha, n)
    if policy is Policy.ONE_CHOICE or n == 1:
        return float(one_choice_values(alpha, n)[n])
    return math.nan if two_choice is None else two_choice


def run_simulate(config: RunConfig) -> None:
    """Simulate the requested policies and check they order as their values do."""
    alpha, n = config.alpha, config.N
    dist = PowerLawDist.pure(alpha)
    policies = [config.policy] if config.policy else list(Policy)
    children = dict(zip(Policy, np.random.SeedSequence(config.seed).spawn(len(Policy)), strict=True))
    reports: dict[Policy, SimReport] = {}
    two_choice_value: float | None = None
    for policy in policies:
        seed = children[policy]
        if policy is Policy.TWO_CHOICE:
            trace = dp_sweep(alpha, n, config.grid_size) if n >= 2 else DpTraceList.empty()
            table = PolicyTable.from_sweep(trace, alpha, n)
            two_choice_value = trace.at(n).V2 if n >= 2 else None
            reports[policy] = run_two_choice(dist, table, config.trials, seed, workers=config.workers)
        elif policy is Policy.ONE_CHOICE:
            thresholds = one_choice_values(alpha, n - 1) if n > 1 else np.ones(1)
            reports[policy] = run_one_choice(dist, thresholds, config.trials, seed, workers=config.workers)
        else:
            reports[policy] = run_prophet(dist, n, config.trials, seed, workers=config.workers)
    rows = [
        report.model_dump(mode="json", exclude={"moment_r"})
        | {"exact": _exact_value(policy, alpha, n, two_choice_value)}
        for policy, report in reports.items()
    ]
    _emit(config, rows)
    if len(reports) == len(Policy):
        _check_dominance(reports)


def _check_dominance(reports: dict[Policy, SimReport]) -> None:
    order = [Policy.PROPHET, Policy.TWO_CHOICE, Policy.ONE_CHOICE]
    for better, worse in zip(order, order[1:], strict=False):
        a, b = reports[better], reports[worse]
        slack = 3.0 * math.hypot(a.stderr, b.stderr)
        if a.mean > b.mean + slack:
            raise InvariantViolation(
                "policy_dominance", f"{better} mean {a.mean:.6g} exceeds {worse} mean {b.mean:.6g} + {slack:.2g}"
            )


@cli.command("simulate")
@_common_options
@click.option("--policy", type=click.Choice([p.value for p in Policy]), default=None, help="Default: all.")
@click.option("--workers", type=int, default=1, show_default=True, help="Simulation threads.")
def simulate_command(alpha: float | None, alphas: str | None, **params: Any) -> None:  # noqa: ANN401
    """Monte Carlo runs of the one-choice, two-choice and prophet policies."""
    if params["N"] is None:
        params["N"] = 200
    _guarded(run_simulate, _config(Command.SIMULATE, alpha, alphas, **params))


def run_moments(config: RunConfig) -> None:
    """One-choice scaled moment recursion and its growth verdict."""
    alpha, r, N = config.alpha, config.r, config.N
    trajectory = moment_recursion(alpha, r, one_choice_thresholds(alpha, N), N)
    lo = max(N // 100, 1)
    verdict = classify_growth(trajectory, lo=lo, hi=N)
    checkpoints = np.unique(np.geomspace(1, N, num=min(N, 41)).astype(int))
    rows = [
        {"alpha": alpha, "r": r, "n": int(k), "S_n": trajectory.at(int(k)), "verdict": verdict.value}
        for k in checkpoints
    ]
    _emit(config, rows)
    click.echo(f"S_n({r:g}) is {verdict}", err=True)
    if verdict is Growth.UNDETERMINED:
        logger.warning("growth of S_n(%g) undetermined over n=%d..%d; raise --n", r, lo, N)
        return
    expected = Growth.BOUNDED if r < 1.0 + alpha else Growth.DIVERGENT if r > 1.0 + alpha else None
    if expected is not None and verdict is not expected:
        raise InvariantViolation("moment_dichotomy", f"r={r}, alpha={alpha}: expected {expected}, saw {verdict}")


@cli.command("moments")
@_common_options
@click.option("--r", type=float, default=3.0, show_default=True, help="Moment order.")
def moments_command(alpha: float | None, alphas: str | None, **params: Any) -> None:  # noqa: ANN401
    """Boundedness of the scaled one-choice moments."""
    _guarded(run_moments, _config(Command.MOMENTS, alpha, alphas, **params))


def run_asymptote(config: RunConfig) -> None:
    """Gaps of the tabulated quantities to their limits along an alpha sequence."""
    report = asymptote_check(config.direction, config.alphas)
    _emit(config, [row.model_dump(mode="json") for row in report.rows])
    for quantity, monotone in report.monotone_approach.items():
        click.echo(f"{quantity}: {'monotone' if monotone else 'non-monotone'} approach", err=True)


@cli.command("asymptote")
@_common_options
@click.option(
    "--direction",
    type=click.Choice([d.value for d in Direction]),
    default=Direction.TO_INFINITY.value,
    show_default=True,
)
def asymptote_command(alpha: float | None, alphas: str | None, direction: str, **params: Any) -> None:  # noqa: ANN401
    """Asymptotic behaviour as alpha goes to zero or infinity."""
    if alpha is None and alphas is None:
        alphas = ",".join(map(str, DEFAULT_ASYMPTOTE_ALPHAS[Direction(direction)]))
    _guarded(run_asymptote, _config(Command.ASYMPTOTE, alpha, alphas, direction=direction, **params))
