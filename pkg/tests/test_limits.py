import math
from contextlib import nullcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from twostop.exceptions import InvariantViolation
from twostop.golden import golden_row
from twostop.kernels import LimitKernel, PowerKernel
from twostop.limits import (
    TABLE1_ALPHAS,
    Direction,
    H_func,
    LimitConstants,
    asymptote_check,
    f_limit,
    h_integral,
    h_limit,
    h_sup,
    solve_b_alpha,
    solve_q_root,
    table1,
)

alphas = st.floats(min_value=0.2, max_value=5.0)


def test_table_alphas():
    assert len(TABLE1_ALPHAS) == 19
    assert TABLE1_ALPHAS[:3] == (0.1, 0.2, 0.3)
    assert TABLE1_ALPHAS[-1] == 10.0


def test_limit_functions():
    assert f_limit(1.0, 2.0) == 0.5
    assert f_limit(3.0, 0.0) == 1.0
    assert h_limit(1.0, 2.0) == pytest.approx(1.0)
    np.testing.assert_allclose(f_limit(1.0, np.array([0.0, 2.0, 6.0])), [1.0, 0.5, 0.25])
    assert isinstance(h_limit(2.0, 1.0), float)


@given(alpha=alphas, y=st.floats(min_value=0.1, max_value=10.0))
def test_f_solves_its_ode(alpha, y):
    # f' = -f**(alpha+1) / (alpha+1), f(0) = 1
    delta = 1e-5
    slope = (f_limit(alpha, y + delta) - f_limit(alpha, y - delta)) / (2 * delta)
    assert slope == pytest.approx(-f_limit(alpha, y) ** (alpha + 1) / (alpha + 1), rel=1e-6)


@given(alpha=alphas)
def test_h_approaches_supremum(alpha):
    assert h_limit(alpha, 1e9) == pytest.approx(h_sup(alpha), rel=1e-6)
    assert h_limit(alpha, 1e3) < h_sup(alpha)


@given(
    alpha=st.floats(min_value=0.1, max_value=10.0),
    y=st.floats(min_value=0.01, max_value=50.0),
)
def test_h_integral_matches_quadrature(alpha, y):
    expected, _ = quad(lambda t: h_limit(alpha, t), 0.0, y, limit=400, epsabs=0.0, epsrel=1e-12)
    assert h_integral(alpha, y) == pytest.approx(expected, rel=1e-9)


def test_h_integral_at_zero():
    assert h_integral(1.0, 0.0) == 0.0


@pytest.mark.parametrize("y", [0.0, 0.5, 2.0, 2.79, 8.0, 40.0])
def test_h_func_alpha_one_closed_form(y):
    # int_0^y u / (1 + u/2) du = 2y - 4 log(1 + y/2)
    expected = 2 * y - 4 * math.log1p(y / 2) + (1 - y) * 2 * y / (2 + y)
    assert H_func(1.0, y) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize(
    "alpha, y, expected",
    [
        (1.0, -1.0, pytest.raises(ValueError)),
        (0.0, 1.0, pytest.raises(ValueError)),
        (1.0, 1.0, nullcontext(2.0 - 4 * math.log1p(0.5))),
    ],
)
def test_h_func_arguments(alpha, y, expected):
    with expected as e:
        assert H_func(alpha, y) == pytest.approx(e)


@pytest.mark.parametrize("alpha", TABLE1_ALPHAS)
def test_table_row_matches_golden(alpha):
    computed = solve_b_alpha(alpha).as_row()
    reference = golden_row(alpha)
    for column, value in reference.items():
        assert computed[column] == pytest.approx(value, abs=2e-3), column


@pytest.mark.parametrize("alpha", [0.05, 0.3, 1.0, 3.0, 25.0])
def test_root_properties(alpha):
    constants = solve_b_alpha(alpha)
    assert constants.b_alpha > 1.0 + 1.0 / alpha
    assert constants.two_choice_limit < 1.0 + 1.0 / alpha
    # H falls steeply through its root; compare against the scale of h there
    assert abs(H_func(alpha, constants.b_alpha)) < 1e-8 * constants.d_alpha * constants.b_alpha
    assert constants.d_alpha == pytest.approx(h_limit(alpha, constants.b_alpha))


@pytest.mark.parametrize("alpha", [0.3, 1.0, 3.0])
def test_h_func_rises_then_falls(alpha):
    peak, b_alpha = 1.0 / alpha, solve_b_alpha(alpha).b_alpha
    rising = [H_func(alpha, y) for y in np.linspace(0.02, 0.98, 49) * peak]
    falling = [H_func(alpha, y) for y in np.linspace(1.02 * peak, 0.99 * 3.0 * b_alpha, 49)]
    assert np.all(np.diff(rising) > 0.0)
    assert np.all(np.diff(falling) < 0.0)


def test_alpha_one_constants():
    constants = solve_b_alpha(1.0)
    assert constants.b_alpha == pytest.approx(2.7940, abs=1e-4)
    assert constants.d_alpha == pytest.approx(1.16562, abs=1e-5)
    assert constants.prophet_limit == pytest.approx(1.0)
    assert constants.rel_improvement == pytest.approx(2.0 - constants.d_alpha)


def test_table1_rows():
    rows = table1((1.0, 2.0))
    assert [row.alpha for row in rows] == [1.0, 2.0]


def test_invariants_reject_disordered_limits():
    good = solve_b_alpha(1.0)
    with pytest.raises(InvariantViolation) as info:
        good.model_copy(update={"two_choice_limit": 0.5}).check_invariants()
    assert info.value.check == "limit_ordering"
    with pytest.raises(InvariantViolation) as info:
        good.model_copy(update={"b_alpha": 1.5}).check_invariants()
    assert info.value.check == "root_bound"
    with pytest.raises(InvariantViolation) as info:
        good.model_copy(update={"rel_improvement": 1.2}).check_invariants()
    assert info.value.check == "improvement_range"


def test_as_row_keys():
    row = solve_b_alpha(2.0).as_row()
    assert list(row) == [
        "alpha",
        "b_alpha",
        "lim_nF_V1",
        "lim_nF_V2",
        "lim_nF_Vp",
        "r34",
        "r45",
        "r35",
        "improvement",
    ]
    assert isinstance(solve_b_alpha(2.0), LimitConstants)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_q_root_of_limit_kernel_is_b_alpha(alpha):
    assert solve_q_root(alpha, LimitKernel(alpha=alpha)) == pytest.approx(solve_b_alpha(alpha).b_alpha, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_q_root_of_power_kernel(alpha):
    assert solve_q_root(alpha, PowerKernel(alpha=alpha)) == pytest.approx(1.0 + 1.0 / alpha, abs=1e-9)


def test_asymptote_large_alpha():
    row = solve_b_alpha(10.0)
    limits = Direction.TO_INFINITY.limits
    assert abs(row.rel_improvement - limits["rel_improvement"]) < 0.004
    assert abs(row.two_choice_limit - limits["two_choice_limit"]) < 0.06
    assert limits["rel_improvement"] == pytest.approx(0.7946, abs=1e-4)


def test_asymptote_small_alpha():
    row = solve_b_alpha(0.1)
    assert abs(row.ratio_31_42 - Direction.TO_ZERO.limits["ratio_31_42"]) < 0.08


def test_asymptote_check_to_infinity():
    report = asymptote_check(Direction.TO_INFINITY, [10.0, 100.0])
    assert len(report.rows) == 2 * len(Direction.TO_INFINITY.limits)
    assert report.gap(100.0, "prophet_limit") < report.gap(10.0, "prophet_limit")
    assert report.gap(100.0, "two_choice_limit") < report.gap(10.0, "two_choice_limit")
    assert report.monotone_approach["one_choice_limit"]


def test_asymptote_check_to_zero():
    report = asymptote_check("to_zero", [0.2, 0.05])
    assert report.direction is Direction.TO_ZERO
    assert report.gap(0.05, "ratio_3_5") < report.gap(0.2, "ratio_3_5")


@pytest.mark.parametrize(
    "direction, sequence",
    [(Direction.TO_INFINITY, [10.0, 5.0]), (Direction.TO_ZERO, [0.1, 0.2]), (Direction.TO_ZERO, [0.1, 0.1])],
)
def test_asymptote_check_rejects_wrong_order(direction, sequence):
    with pytest.raises(ValueError):
        asymptote_check(direction, sequence)
