from pathlib import Path

import pytest
from click.testing import CliRunner
from polyfactory.factories.pydantic_factory import ModelFactory

from twostop.__about__ import __version__
from twostop.cli import Command, RunConfig, cli
from twostop.golden import GOLDEN_COLUMNS
from twostop.limits import Direction
from twostop.recursion import Growth
from twostop.reports import ReportFormat, read_report
from twostop.sim import Policy


class RunConfigFactory(ModelFactory[RunConfig]):
    __model__ = RunConfig


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner: CliRunner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_table1_subset_with_diff(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "table1.csv"
    result = runner.invoke(cli, ["table1", "--alphas", "0.5,1,2", "--diff", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "max deviation" in result.output
    frame = read_report(out)
    assert list(frame.columns) == GOLDEN_COLUMNS
    assert frame["alpha"].tolist() == [0.5, 1.0, 2.0]


def test_table1_to_stdout(runner: CliRunner):
    result = runner.invoke(cli, ["table1", "--alpha", "1"])
    assert result.exit_code == 0
    assert result.output.splitlines()[0] == ",".join(GOLDEN_COLUMNS)


def test_table1_failed_check_exits_one(runner: CliRunner, monkeypatch):
    monkeypatch.setattr("twostop.cli.GOLDEN_TOLERANCE", 0.0)
    result = runner.invoke(cli, ["table1", "--alpha", "1", "--diff"])
    assert result.exit_code == 1
    assert "golden_deviation" in result.output


def test_converge(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "trace.csv"
    result = runner.invoke(cli, ["converge", "--alpha", "1", "--n", "10", "--grid-size", "1024", "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = read_report(out)
    assert frame["n"].tolist() == list(range(2, 11))
    assert frame["V2"][0] == pytest.approx(1 / 3, rel=1e-5)
    assert {"W_n", "B_n", "B_n_alpha", "max_eps"} <= set(frame.columns)


def test_sandwich(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "sandwich.json"
    args = ["sandwich", "--alpha", "1", "--n", "200", "--j", "32,64", "--grid-size", "2048"]
    result = runner.invoke(cli, [*args, "--format", "json", "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = read_report(out)
    assert frame["j"].tolist() == [32, 64]
    assert (frame["lower"] <= frame["W"]).all()
    assert (frame["W"] <= frame["upper"]).all()


@pytest.mark.parametrize("j_list", ["a,b", "16"])
def test_sandwich_bad_j(runner: CliRunner, j_list):
    result = runner.invoke(cli, ["sandwich", "--alpha", "1", "--n", "100", "--j", j_list, "--grid-size", "1024"])
    assert result.exit_code == 2


def test_simulate_is_reproducible(runner: CliRunner, tmp_path: Path):
    outputs = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        args = ["simulate", "--alpha", "1", "--n", "20", "--trials", "2000", "--seed", "42"]
        result = runner.invoke(cli, [*args, "--out", str(out)])
        assert result.exit_code == 0, result.output
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    frame = read_report(tmp_path / "first.csv")
    assert sorted(frame["policy"]) == sorted(p.value for p in Policy)
    assert frame["exact"].notna().all()


def test_simulate_single_policy(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "prophet.csv"
    args = ["simulate", "--alpha", "1", "--n", "5", "--trials", "1000", "--policy", "prophet"]
    result = runner.invoke(cli, [*args, "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = read_report(out)
    assert frame["policy"].tolist() == ["prophet"]
    assert frame["exact"][0] == pytest.approx(1 / 6, rel=1e-5)


@pytest.mark.parametrize("r, verdict", [("3", "divergent"), ("1.5", "bounded")])
def test_moments(runner: CliRunner, tmp_path: Path, r, verdict):
    out = tmp_path / "moments.csv"
    result = runner.invoke(cli, ["moments", "--alpha", "1", "--r", r, "--n", "100000", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert f"is {verdict}" in result.output
    frame = read_report(out)
    assert set(frame["verdict"]) == {verdict}
    assert frame["n"].iloc[-1] == 100_000


def test_moments_short_window_is_reported_not_failed(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "moments.csv"
    result = runner.invoke(cli, ["moments", "--alpha", "1", "--r", "1.5", "--n", "100", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "is undetermined" in result.output
    assert set(read_report(out)["verdict"]) == {"undetermined"}


def test_moments_wrong_verdict_exits_one(runner: CliRunner, monkeypatch):
    monkeypatch.setattr("twostop.cli.classify_growth", lambda *args, **kwargs: Growth.DIVERGENT)
    result = runner.invoke(cli, ["moments", "--alpha", "1", "--r", "1.5", "--n", "100"])
    assert result.exit_code == 1
    assert "moment_dichotomy" in result.output


def test_asymptote(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "asymptote.csv"
    result = runner.invoke(cli, ["asymptote", "--direction", "to_infinity", "--alphas", "10,20", "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = read_report(out)
    assert len(frame) == 2 * len(Direction.TO_INFINITY.limits)
    assert "monotone" in result.output


@pytest.mark.parametrize(
    "args",
    [
        ["table1", "--alpha", "-1"],
        ["table1", "--alphas", "a,1"],
        ["table1", "--alpha", "1", "--format", "xml"],
        ["converge", "--alpha", "1", "--n", "10", "--grid-size", "64"],
        ["simulate", "--alpha", "1", "--n", "5", "--trials", "10", "--workers", "0"],
    ],
)
def test_invalid_arguments_exit_two(runner: CliRunner, args):
    assert runner.invoke(cli, args).exit_code == 2


def test_unwritable_output_exits_one(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "missing" / "table1.csv"
    result = runner.invoke(cli, ["table1", "--alpha", "1", "--out", str(out)])
    assert result.exit_code == 1


def test_config_round_trips_through_arguments(runner: CliRunner, tmp_path: Path):
    out = tmp_path / "factory.json"
    config = RunConfigFactory.build(
        command=Command.TABLE1,
        alphas=[1.0, 2.0],
        output=out,
        report_format=ReportFormat.JSON,
        diff=True,
    )
    result = runner.invoke(cli, config.to_args())
    assert result.exit_code == 0, result.output
    assert read_report(out)["alpha"].tolist() == [1.0, 2.0]


def test_to_args_carries_command_options():
    config = RunConfig(command=Command.SIMULATE, policy=Policy.TWO_CHOICE, workers=3)
    args = config.to_args()
    assert args[0] == "simulate"
    assert args[args.index("--policy") + 1] == "two_choice"
    assert args[args.index("--workers") + 1] == "3"
    assert config.alpha == 1.0
