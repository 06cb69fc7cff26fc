"""Limiting functions and asymptotic constants of the two-choice problem.

The scaled limits are

    f(y) = (1 + alpha y / (alpha + 1))**(-1/alpha),    h(y) = y**(1/alpha) f(y),

and the two-choice constant is ``h(b_alpha)**alpha`` where ``b_alpha`` is the
unique root on (1/alpha, inf) of

    H(y) = int_0^y h(u) du + (1/alpha - y) h(y).

Classes:
    LimitConstants: b_alpha, d_alpha and the limits and ratios of one alpha row.
    Direction: Which end of the alpha axis an asymptote check approaches.
    AsymptoteRow: Distance of one quantity to its stated limit at one alpha.
    AsymptoteReport: All rows of one asymptote check.

Functions:
    f_limit, h_limit, h_integral, H_func: Closed forms and the functional H.
    q_function, solve_q_root: The same functional and root for any kernel.
    solve_b_alpha, table1, asymptote_check: Constants and diagnostics.
"""

import logging
import math
from collections.abc import Sequence
from enum import StrEnum
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, validate_call
from scipy.integrate import quad
from scipy.special import gamma, hyp2f1

from twostop.exceptions import InvariantViolation
from twostop.models import Alpha
from twostop.utils import expand_bracket, monotone_root

__all__ = [
    "TABLE1_ALPHAS",
    "AsymptoteReport",
    "AsymptoteRow",
    "Direction",
    "H_func",
    "LimitConstants",
    "asymptote_check",
    "f_limit",
    "h_integral",
    "h_limit",
    "q_function",
    "solve_b_alpha",
    "solve_q_root",
    "table1",
]

logger = logging.getLogger(__name__)

TABLE1_ALPHAS: tuple[float, ...] = (
    *(round(0.1 * k, 1) for k in range(1, 11)),
    *(float(k) for k in range(2, 11)),
)
QUAD_EPSABS = 1e-11
ROOT_XTOL = 1e-10
HYP2F1_MAX_W = 0.8


def f_limit(alpha: float, y: float | np.ndarray) -> float | np.ndarray:
    """``f(y) = (1 + alpha y / (alpha + 1))**(-1/alpha)``; ``f(0) = 1``.

    Examples:
        >>> f_limit(1.0, 2.0)
        0.5

    """
    result = (1.0 + alpha * np.asarray(y, dtype=float) / (alpha + 1.0)) ** (-1.0 / alpha)
    return float(result) if result.ndim == 0 else result


def h_limit(alpha: float, y: float | np.ndarray) -> float | np.ndarray:
    """``h(y) = (y / (1 + alpha y / (alpha + 1)))**(1/alpha) = y**(1/alpha) f(y)``."""
    y = np.asarray(y, dtype=float)
    result = (y / (1.0 + alpha * y / (alpha + 1.0))) ** (1.0 / alpha)
    return float(result) if result.ndim == 0 else result


def h_sup(alpha: float) -> float:
    """``lim_{y -> inf} h(y) = (1 + 1/alpha)**(1/alpha)``."""
    return (1.0 + 1.0 / alpha) ** (1.0 / alpha)


def h_integral(alpha: float, y: float, *, epsabs: float = QUAD_EPSABS) -> float:
    """``int_0^y h(u) du``.

    With ``p = 1/alpha``, ``a = alpha / (alpha + 1)`` and ``w = a y / (1 + a y)``
    the integral is ``y**(p+1) / (p+1) * (1 + a y)**(-p) * 2F1(p, 1; p+2; w)``.
    The series converges slowly as ``w -> 1``; past ``HYP2F1_MAX_W`` QUADPACK
    takes over, with the ``u**(1/alpha)`` factor in its algebraic weight.
    """
    if y <= 0.0:
        return 0.0
    a = alpha / (alpha + 1.0)
    inv = 1.0 / alpha
    w = a * y / (1.0 + a * y)
    if w <= HYP2F1_MAX_W:
        head = y ** (inv + 1.0) / (inv + 1.0) * (1.0 + a * y) ** (-inv)
        return float(head * hyp2f1(inv, 1.0, inv + 2.0, w))
    value, _ = quad(
        lambda t: (1.0 + a * t) ** (-inv),
        0.0,
        y,
        weight="alg",
        wvar=(inv, 0.0),
        epsabs=epsabs,
        epsrel=1e-13,
        limit=200,
    )
    return float(value)


@validate_call
def H_func(alpha: Alpha, y: float, *, epsabs: float = QUAD_EPSABS) -> float:  # noqa: N802
    """``H(y) = int_0^y h(u) du + (1/alpha - y) h(y)``."""
    if y < 0:
        raise ValueError(f"y must be non-negative, got {y}")
    return h_integral(alpha, y, epsabs=epsabs) + (1.0 / alpha - y) * float(h_limit(alpha, y))


class MonotoneKernel(Protocol):
    """A monotone recursion kernel ``q`` with a known integral."""

    cap: float

    def __call__(self, y: float) -> float: ...  # noqa: D102

    def integral(self, s: float) -> float: ...  # noqa: D102


def q_function(alpha: float, kernel: MonotoneKernel, y: float) -> float:
    """``Q(y) = int_0^y q(u) du + (1/alpha - y) q(y)`` for any kernel."""
    return kernel.integral(y) + (1.0 / alpha - y) * kernel(y)


def solve_q_root(alpha: float, kernel: MonotoneKernel) -> float:
    """Root of ``Q`` on (1/alpha, A) for a kernel strictly increasing up to ``A = kernel.cap``.

    Raises:
        ValueError: If ``Q`` stays positive up to the cap.
    """
    lower = 1.0 / alpha + 1e-6

    def q_of(y: float) -> float:
        return q_function(alpha, kernel, y)

    if math.isfinite(kernel.cap):
        if q_of(kernel.cap) >= 0.0:
            raise ValueError(f"Q({kernel.cap}) >= 0: no root of Q below the cap")
        upper = kernel.cap
    else:
        upper = expand_bracket(q_of, lower, max(2.0 * (1.0 + 1.0 / alpha), 4.0))
    return monotone_root(q_of, lower, upper, xtol=ROOT_XTOL)


class LimitConstants(BaseModel):
    """The asymptotic constants of one alpha.

    Attributes:
        alpha: Shape parameter.
        b_alpha: Root of H on (1/alpha, inf).
        d_alpha: ``h(b_alpha)``, the limit of ``W_n``.
        two_choice_limit: ``lim n F(V_n^2) = d_alpha**alpha``.
        one_choice_limit: ``lim n F(V_n^1) = 1 + 1/alpha``.
        prophet_limit: ``lim n F(V_n^p) = Gamma(1 + 1/alpha)**alpha``.
        ratio_31_42: one / two.
        ratio_42_5: two / prophet.
        ratio_3_5: one / prophet.
        rel_improvement: ``lim (V^1 - V^2) / (V^1 - V^p)``.
    """

    model_config = ConfigDict(frozen=True)

    alpha: Alpha
    b_alpha: float
    d_alpha: float
    two_choice_limit: float
    one_choice_limit: float
    prophet_limit: float
    ratio_31_42: float
    ratio_42_5: float
    ratio_3_5: float
    rel_improvement: float

    def check_invariants(self) -> None:
        """Raise ``InvariantViolation`` unless prophet < two < one, b > 1 + 1/alpha, 0 < improvement < 1."""
        if not self.prophet_limit < self.two_choice_limit < self.one_choice_limit:
            raise InvariantViolation(
                "limit_ordering",
                f"alpha={self.alpha}: prophet={self.prophet_limit}, "
                f"two={self.two_choice_limit}, one={self.one_choice_limit}",
            )
        if not self.b_alpha > 1.0 + 1.0 / self.alpha:
            raise InvariantViolation("root_bound", f"alpha={self.alpha}: b_alpha={self.b_alpha}")
        if not 0.0 < self.rel_improvement < 1.0:
            raise InvariantViolation(
                "improvement_range", f"alpha={self.alpha}: improvement={self.rel_improvement}"
            )

    def as_row(self) -> dict[str, float]:
        """The limiting-value table columns under their stable report names."""
        return {
            "alpha": self.alpha,
            "b_alpha": self.b_alpha,
            "lim_nF_V1": self.one_choice_limit,
            "lim_nF_V2": self.two_choice_limit,
            "lim_nF_Vp": self.prophet_limit,
            "r34": self.ratio_31_42,
            "r45": self.ratio_42_5,
            "r35": self.ratio_3_5,
            "improvement": self.rel_improvement,
        }


def relative_improvement(alpha: float, one: float, two: float, prophet: float) -> float:
    """``(c1 - c2) / (c1 - c5)`` with ``c = limit**(1/alpha)``, the scale of ``n**(1/alpha) V_n``."""
    c1, c2, c5 = (value ** (1.0 / alpha) for value in (one, two, prophet))
    return (c1 - c2) / (c1 - c5)


@validate_call
def solve_b_alpha(alpha: Alpha) -> LimitConstants:
    """Solve ``H(b) = 0`` on (1/alpha, inf) and derive every constant of the row.

    The bracket starts at ``[1/alpha + 1e-6, max(2 (1 + 1/alpha), 4)]`` and the
    upper end doubles until ``H < 0``; ``H -> -inf`` guarantees termination.
    """
    lower = 1.0 / alpha + 1e-6

    def h_func(y: float) -> float:
        return H_func(alpha, y)

    upper = expand_bracket(h_func, lower, max(2.0 * (1.0 + 1.0 / alpha), 4.0))
    b_alpha = monotone_root(h_func, lower, upper, xtol=ROOT_XTOL)
    d_alpha = float(h_limit(alpha, b_alpha))
    two = d_alpha**alpha
    one = 1.0 + 1.0 / alpha
    prophet = float(gamma(1.0 + 1.0 / alpha)) ** alpha
    constants = LimitConstants(
        alpha=alpha,
        b_alpha=b_alpha,
        d_alpha=d_alpha,
        two_choice_limit=two,
        one_choice_limit=one,
        prophet_limit=prophet,
        ratio_31_42=one / two,
        ratio_42_5=two / prophet,
        ratio_3_5=one / prophet,
        rel_improvement=relative_improvement(alpha, one, two, prophet),
    )
    constants.check_invariants()
    logger.info("alpha=%g: b_alpha=%.10f, h^alpha(b_alpha)=%.10f", alpha, b_alpha, two)
    return constants


def table1(alphas: Sequence[float] = TABLE1_ALPHAS) -> list[LimitConstants]:
    """Solve every alpha of ``alphas`` (default: the 19 tabulated values)."""
    return [solve_b_alpha(alpha) for alpha in alphas]


class Direction(StrEnum):
    """End of the alpha axis approached by an asymptote check."""

    TO_ZERO = "to_zero"
    TO_INFINITY = "to_infinity"

    @property
    def limits(self) -> dict[str, float]:
        """Stated limits of the ``LimitConstants`` fields along this direction."""
        if self is Direction.TO_INFINITY:
            return {
                "one_choice_limit": 1.0,
                "two_choice_limit": 1.0 - math.exp(-1.0),
                "prophet_limit": math.exp(-np.euler_gamma),
                "rel_improvement": (1.0 - math.log(math.e - 1.0)) / np.euler_gamma,
            }
        return {
            "ratio_31_42": 2.0,
            "ratio_42_5": math.e / 2.0,
            "ratio_3_5": math.e,
            "rel_improvement": 1.0,
        }


class AsymptoteRow(BaseModel):
    """Distance of one quantity to its stated limit at one alpha."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    quantity: str
    value: float
    limit: float
    gap: float


class AsymptoteReport(BaseModel):
    """All rows of an asymptote check plus a monotone-approach diagnostic per quantity."""

    model_config = ConfigDict(frozen=True)

    direction: Direction
    rows: list[AsymptoteRow]
    monotone_approach: dict[str, bool]

    def gap(self, alpha: float, quantity: str) -> float:
        """Absolute gap of ``quantity`` at ``alpha``."""
        return next(r.gap for r in self.rows if r.alpha == alpha and r.quantity == quantity)


def asymptote_check(direction: Direction | str, alpha_sequence: Sequence[float]) -> AsymptoteReport:
    """Evaluate the tabulated quantities along ``alpha_sequence`` against their limits.

    Raises:
        ValueError: If the sequence is not strictly monotone toward ``direction``.
    """
    direction = Direction(direction)
    steps = np.diff(np.asarray(alpha_sequence, dtype=float))
    toward = steps > 0 if direction is Direction.TO_INFINITY else steps < 0
    if not np.all(toward):
        raise ValueError(f"alpha sequence {list(alpha_sequence)} does not move {direction}")
    rows: list[AsymptoteRow] = []
    for alpha in alpha_sequence:
        constants = solve_b_alpha(alpha)
        for quantity, limit in direction.limits.items():
            value = float(getattr(constants, quantity))
            rows.append(
                AsymptoteRow(alpha=alpha, quantity=quantity, value=value, limit=limit, gap=abs(value - limit))
            )
    monotone = {
        quantity: bool(np.all(np.diff([r.gap for r in rows if r.quantity == quantity]) <= 0))
        for quantity in direction.limits
    }
    return AsymptoteReport(direction=direction, rows=rows, monotone_approach=monotone)
