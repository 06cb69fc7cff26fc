import logging

import numpy as np
import pytest

from twostop.dp import dp_sweep, one_choice_values
from twostop.exceptions import ConvergenceError, MalformedKernelError
from twostop.kernels import CallableKernel, LimitKernel, PowerKernel
from twostop.limits import solve_b_alpha
from twostop.recursion import (
    Growth,
    MomentTrajectory,
    RecursionSpec,
    RecursionState,
    StopRule,
    admissible_j,
    classify_growth,
    moment_recursion,
    one_choice_recursion,
    one_choice_thresholds,
    run_to_convergence,
    sandwich_bounds,
    step,
)

D_ONE = 1.16562


@pytest.fixture(scope="module")
def d_alpha_one():
    return solve_b_alpha(1.0).d_alpha


def test_step_one_choice_alpha_one():
    spec = RecursionSpec(alpha=1.0, kernel=PowerKernel(alpha=1.0), m=2, c=2 / 3)
    state = step(spec, spec.initial_state())
    assert state.n == 3
    # (3/2) (1/2) [c**2 / 2 + (2 - c) c]
    assert state.Z == pytest.approx(5 / 6)


def test_step_before_start():
    spec = RecursionSpec(alpha=1.0, kernel=PowerKernel(alpha=1.0), m=5, c=1.0)
    with pytest.raises(ValueError):
        step(spec, RecursionState(n=2, Z=1.0))


def test_step_keeps_recent_history():
    spec = RecursionSpec(alpha=1.0, kernel=LimitKernel(alpha=1.0), m=2, c=1.0)
    state = spec.initial_state(history_size=3)
    for _ in range(5):
        state = step(spec, state)
    assert [n for n, _ in state.history] == [5, 6, 7]
    assert state.history[-1][1] == state.Z


def test_malformed_kernel_rejected():
    with pytest.raises(MalformedKernelError):
        RecursionSpec(alpha=1.0, kernel=CallableKernel(q=lambda y: 1.0 + y), c=1.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_power_kernel_reproduces_one_choice(alpha):
    zs = one_choice_recursion(alpha, 200)
    ns = np.arange(1, 201)
    assert np.isnan(zs[0])
    np.testing.assert_allclose(zs[1:], ns ** (1 / alpha) * one_choice_values(alpha, 200)[1:], rtol=1e-9)
    np.testing.assert_allclose(one_choice_thresholds(alpha, 200)[1:], zs[1:], rtol=1e-9)


@pytest.mark.parametrize("alpha, limit", [(1.0, 2.0), (2.0, 1.5**0.5)])
def test_power_kernel_converges_to_one_choice_limit(alpha, limit):
    spec = RecursionSpec(alpha=alpha, kernel=PowerKernel(alpha=alpha), m=2, c=2 / 3)
    report = run_to_convergence(spec, StopRule(max_n=20_000))
    assert report.target == pytest.approx(limit)
    assert report.final_Z == pytest.approx(limit, abs=1e-2)


def test_limit_kernel_converges_to_d_alpha(d_alpha_one):
    spec = RecursionSpec(alpha=1.0, kernel=LimitKernel(alpha=1.0), m=2, c=2 / 3)
    report = run_to_convergence(spec, StopRule(max_n=20_000, stall_tol=1e-4))
    assert report.converged
    assert report.target == pytest.approx(d_alpha_one, abs=1e-9)
    assert report.final_Z == pytest.approx(D_ONE, abs=5e-3)
    assert report.trap_entry is not None
    assert report.trap_held
    assert report.drift_violations == 0
    assert len(report.zs) == report.final_n - 1
    assert report.window[-1] == (report.final_n, report.final_Z)


@pytest.mark.parametrize("factor", [0.1, 1.0, 10.0])
def test_limit_is_independent_of_start(factor, d_alpha_one):
    spec = RecursionSpec(alpha=1.0, kernel=LimitKernel(alpha=1.0), m=2, c=factor * d_alpha_one)
    report = run_to_convergence(spec, StopRule(max_n=20_000, stall_tol=1e-4))
    assert report.final_Z == pytest.approx(d_alpha_one, abs=5e-3)


def test_trap_holds_from_the_limit(d_alpha_one):
    spec = RecursionSpec(alpha=1.0, kernel=LimitKernel(alpha=1.0), m=5000, c=d_alpha_one)
    state = spec.initial_state()
    for _ in range(1000):
        state = step(spec, state)
        assert abs(state.Z - d_alpha_one) <= 1e-3


def test_strict_stop_raises():
    spec = RecursionSpec(alpha=1.0, kernel=LimitKernel(alpha=1.0), m=2, c=2 / 3)
    with pytest.raises(ConvergenceError):
        run_to_convergence(spec, StopRule(max_n=50, strict=True))


def test_lenient_stop_warns(caplog):
    spec = RecursionSpec(alpha=1.0, kernel=LimitKernel(alpha=1.0), m=2, c=2 / 3)
    with caplog.at_level(logging.WARNING, logger="twostop.recursion"):
        report = run_to_convergence(spec, StopRule(max_n=50))
    assert not report.converged
    assert report.final_n == 50
    assert "no stall" in caplog.text


def test_admissible_j_alpha_one():
    assert admissible_j(1.0) == 64


def test_admissible_j_none_qualify():
    with pytest.raises(ValueError):
        admissible_j(1.0, candidates=[2, 4])


def test_sandwich_bounds_short_horizon():
    trace = dp_sweep(1.0, 300, 2048)
    report = sandwich_bounds(1.0, [32, 64], 300, trace=trace)
    assert report.checked == (300 - 32 + 1) + (300 - 64 + 1)
    for triple in report.triples:
        assert triple.lower <= triple.W <= triple.upper
        assert triple.W == trace.at(300).W_n
    lower_32, lower_64 = (t.lower for t in report.triples)
    assert lower_32 < lower_64
    assert [row["j"] for row in report.records()] == [32, 64]


def test_sandwich_bounds_rejects_decreasing_kernel():
    with pytest.raises(ValueError):
        sandwich_bounds(1.0, [16], 100, trace=dp_sweep(1.0, 100, 1024))


@pytest.mark.slow
def test_sandwich_bounds_hold_to_5000(alpha_one_sweep):
    report = sandwich_bounds(1.0, [32, 64, 128], 5000, trace=alpha_one_sweep)
    lowers = [t.lower for t in report.triples]
    assert lowers == sorted(lowers)
    gaps = [t.upper - t.lower for t in report.triples]
    assert gaps[0] > gaps[1] > gaps[2] > 0


@pytest.mark.slow
def test_sandwich_bounds_near_limit(alpha_one_sweep):
    (triple,) = sandwich_bounds(1.0, [512], 10_000, trace=alpha_one_sweep).triples
    assert triple.lower == pytest.approx(D_ONE, abs=2e-2)
    assert triple.upper == pytest.approx(D_ONE, abs=2e-2)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_first_moment_is_the_one_choice_value(alpha):
    thresholds = one_choice_thresholds(alpha, 500)
    trajectory = moment_recursion(alpha, 1.0, thresholds, 500)
    np.testing.assert_allclose(trajectory.values, thresholds[1:], rtol=1e-9)


@pytest.mark.parametrize("r, expected", [(1.5, Growth.BOUNDED), (3.0, Growth.DIVERGENT)])
def test_moment_dichotomy_alpha_one(r, expected):
    trajectory = moment_recursion(1.0, r, one_choice_thresholds(1.0, 100_000), 100_000)
    assert classify_growth(trajectory) is expected


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("multiple, expected", [(1.0, Growth.BOUNDED), (3.0, Growth.DIVERGENT)])
def test_moment_dichotomy_constant_threshold(alpha, multiple, expected):
    n = 100_000
    kappa = np.full(n + 1, 2.0 ** (1 / alpha))
    trajectory = moment_recursion(alpha, multiple * alpha, kappa, n, start=2, initial=1.0)
    assert trajectory.ns[0] == 2
    assert classify_growth(trajectory) is expected


def test_moment_recursion_arguments():
    with pytest.raises(ValueError):
        moment_recursion(1.0, 2.0, [1.0, 1.0], 10)
    trajectory = moment_recursion(1.0, 2.0, np.ones(11), 10)
    assert trajectory.at(1) == pytest.approx(1 / 3)
    with pytest.raises(KeyError):
        trajectory.at(11)


def test_classify_growth_undetermined():
    trajectory = MomentTrajectory(alpha=1.0, r=2.0, start=1, values=np.linspace(1.0, 5.0, 10))
    assert classify_growth(trajectory, lo=2, hi=10) is Growth.UNDETERMINED
