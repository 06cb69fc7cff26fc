"""Exact finite-n dynamic programming for the pure U^alpha family.

For ``F(x) = x**alpha`` on [0, 1] the one-choice value with guarantee ``x`` is
the iterate ``g_n(x)`` of ``g(x) = x - x**(alpha + 1) / (alpha + 1)``. The
two-choice value ``V_n`` obeys

    V_{n+1} = int_0^{b_n} g_n(x) alpha x**(alpha - 1) dx + (1 - b_n**alpha) V_n,

where the threshold ``b_n`` solves ``g_n(b_n) = V_n``. The sweep keeps ``g_n``
sampled on a fixed abscissa grid and advances it pointwise, so the grid never
needs re-interpolating from one stage to the next.

Classes:
    GnGrid: ``g_n`` sampled on the abscissa grid at one stage.
    DpTrace: One stage of the sweep.
    DpTraceList: The full sweep, filterable by field.
    FnHn: Scaled functions ``f_n`` and ``h_n`` sampled on ``y = n x**alpha``.

Functions:
    g1, iterate_g, dp_sweep, fn_hn: The operations of the module.
"""

import logging
import math
from collections.abc import Callable
from typing import Annotated, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, validate_call
from scipy.integrate import simpson
from scipy.special import gammaln

from twostop.exceptions import ResolutionError
from twostop.limits import f_limit
from twostop.models import Alpha, PositiveInt, RecordList
from twostop.utils import monotone_root

__all__ = [
    "DpTrace",
    "DpTraceList",
    "FnHn",
    "GnGrid",
    "RateFit",
    "SandwichResiduals",
    "abscissae",
    "dp_sweep",
    "fit_rate",
    "fn_hn",
    "g1",
    "iterate_g",
    "one_choice_values",
    "prophet_value",
    "sandwich_residuals",
    "v2_closed_form",
]

logger = logging.getLogger(__name__)

UnitInterval = Annotated[float, Field(ge=0.0, le=1.0)]
THRESHOLD_RTOL = 1e-12
MIN_POINTS_BELOW_THRESHOLD = 8

_array_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


def _g_step(alpha: float, values: np.ndarray | float) -> np.ndarray | float:
    return values - values ** (alpha + 1.0) / (alpha + 1.0)


@validate_call
def g1(alpha: Alpha, x: UnitInterval) -> float:
    """Evaluate ``g(x) = E[X ^ x] = x - x**(alpha + 1) / (alpha + 1)``.

    Examples:
        >>> g1(1.0, 1.0)
        0.5

    """
    return float(_g_step(alpha, x))


@validate_call
def iterate_g(alpha: Alpha, x: UnitInterval, n: PositiveInt) -> float:
    """Evaluate the n-fold iterate ``g_n(x)``, the one-choice value with guarantee ``x``.

    Examples:
        >>> iterate_g(1.0, 1.0, 3)
        0.3046875

    """
    value = x
    for _ in range(n):
        value = value - value ** (alpha + 1.0) / (alpha + 1.0)
    return value


@validate_call
def one_choice_values(alpha: Alpha, N: PositiveInt) -> np.ndarray:  # noqa: N803
    """Return ``V_n^1 = g_n(1)`` for ``n = 0..N``; index 0 holds ``x_F = 1``."""
    values = np.empty(N + 1)
    values[0] = 1.0
    for n in range(1, N + 1):
        values[n] = _g_step(alpha, values[n - 1])
    return values


@validate_call
def v2_closed_form(alpha: Alpha) -> float:
    """``E[X_2 ^ X_1] = int_0^1 (1 - x**alpha)**2 dx = 1 - 2/(alpha+1) + 1/(2 alpha+1)``."""
    return 1.0 - 2.0 / (alpha + 1.0) + 1.0 / (2.0 * alpha + 1.0)


@validate_call
def prophet_value(alpha: Alpha, n: PositiveInt) -> float:
    """``E[min(X_n, ..., X_1)] = Gamma(n+1) Gamma(1+1/alpha) / Gamma(n+1+1/alpha)``."""
    inv = 1.0 / alpha
    return math.exp(gammaln(n + 1.0) + gammaln(1.0 + inv) - gammaln(n + 1.0 + inv))


@validate_call
def abscissae(alpha: Alpha, grid_size: PositiveInt) -> np.ndarray:
    """Grid ``x_i = (i / G)**max(1, 3 / alpha)``, ``i = 1..G``, ending at exactly 1.

    Raises:
        ValueError: If ``x_1`` underflows, roughly ``alpha < 3 log10(G) / 308``.
    """
    power = max(1.0, 3.0 / alpha)
    xs = (np.arange(1, grid_size + 1, dtype=float) / grid_size) ** power
    if xs[0] < np.finfo(float).tiny:
        raise ValueError(f"alpha={alpha} is too small for grid_size={grid_size}: the first abscissa underflows")
    return xs


class GnGrid(BaseModel):
    """``g_n`` sampled on a strictly increasing abscissa grid on (0, 1].

    Attributes:
        alpha: Shape parameter.
        n: Stage index.
        xs: Abscissae, strictly increasing, ``xs[-1] == 1``.
        gvals: ``g_n(xs)``.
    """

    model_config = _array_config

    alpha: Alpha
    n: PositiveInt
    xs: np.ndarray
    gvals: np.ndarray

    @classmethod
    def initial(cls, alpha: float, grid_size: int) -> Self:
        """Stage 1, ``g_1 = g`` on the default abscissae."""
        xs = abscissae(alpha, grid_size)
        return cls(alpha=alpha, n=1, xs=xs, gvals=_g_step(alpha, xs))

    def advance(self) -> Self:
        """Stage ``n + 1`` by the pointwise law ``g_{n+1} = g_n - g_n**(alpha+1)/(alpha+1)``."""
        return self.__class__(
            alpha=self.alpha, n=self.n + 1, xs=self.xs, gvals=_g_step(self.alpha, self.gvals)
        )

    @property
    def us(self) -> np.ndarray:
        """Transformed abscissae ``u = x**alpha``."""
        return self.xs**self.alpha

    def threshold(self, value: float) -> float:
        """Solve ``g_n(b) = value`` for ``b``."""
        return _solve_threshold(self.alpha, self.xs, self.us, self.gvals, value, self.n)[0]


class DpTrace(BaseModel):
    """One stage of the two-choice sweep.

    Attributes:
        n: Stage (number of variables).
        V1: One-choice value ``g_n(1)``.
        V2: Two-choice value.
        b_n: First-choice threshold, ``g_n(b_n) = V2``.
        W_n: ``n**(1/alpha) * V2``.
        B_n: ``n**(1/alpha) * b_n``.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    V1: float
    V2: float
    b_n: float
    W_n: float
    B_n: float


class DpTraceList(RecordList[DpTrace]):
    """The stages of a sweep, in increasing ``n``."""

    def at(self, n: int) -> DpTrace:
        """The record for stage ``n``."""
        first = self.root[0].n
        record = self.root[n - first]
        if record.n != n:
            raise KeyError(f"stage {n} is not in this trace")
        return record


def _solve_threshold(
    alpha: float,
    xs: np.ndarray,
    us: np.ndarray,
    gvals: np.ndarray,
    value: float,
    stage: int,
) -> tuple[float, int]:
    """Return ``(b, i)`` with ``g_n(b) = value`` and ``xs[i-1] < b <= xs[i]``.

    Inside the bracketing cell ``f_n = g_n / x`` is interpolated linearly in
    ``u = x**alpha``, where it is smooth.
    """
    i = int(np.searchsorted(gvals, value, side="left"))
    if not math.isfinite(value) or i == 0 or i >= len(xs):
        raise ResolutionError(stage, f"V={value!r} outside g_n range on the grid")
    if i < MIN_POINTS_BELOW_THRESHOLD:
        raise ResolutionError(stage, f"only {i} abscissae below the threshold")
    x_lo, x_hi = xs[i - 1], xs[i]
    u_lo, u_hi = us[i - 1], us[i]
    r_lo, r_hi = gvals[i - 1] / x_lo, gvals[i] / x_hi

    def excess(x: float) -> float:
        u = x**alpha
        ratio = r_lo + (r_hi - r_lo) * (u - u_lo) / (u_hi - u_lo)
        return x * ratio - value

    b = monotone_root(excess, x_lo, x_hi, xtol=THRESHOLD_RTOL * x_hi)
    return b, i


def _next_value(us: np.ndarray, gvals: np.ndarray, i: int, b: float, alpha: float, value: float) -> float:
    """Advance ``V_n`` to ``V_{n+1}`` by quadrature in ``u = x**alpha``.

    Simpson on the grid nodes below the threshold, trapezoid on the partial
    cell ``[u_{i-1}, b**alpha]``.
    """
    b_u = b**alpha
    nodes = np.concatenate(([0.0], us[:i]))
    heights = np.concatenate(([0.0], gvals[:i]))
    last_cell = 0.5 * (b_u - us[i - 1]) * (gvals[i - 1] + value)
    return float(simpson(heights, x=nodes) + last_cell + (1.0 - b_u) * value)


StageObserver = Callable[[GnGrid, DpTrace], None]


@validate_call(config=ConfigDict(arbitrary_types_allowed=True))
def dp_sweep(
    alpha: Alpha,
    N: Annotated[int, Field(ge=2)],  # noqa: N803
    grid_size: Annotated[int, Field(ge=512)] = 4096,
    *,
    on_stage: StageObserver | None = None,
) -> DpTraceList:
    """Run the two-choice recursion for stages ``n = 2..N``.

    Args:
        alpha: Shape parameter of U^alpha.
        N: Last stage.
        grid_size: Number of abscissae.
        on_stage: Optional observer called with ``(grid, record)`` at each stage.

    Returns:
        One ``DpTrace`` per stage.

    Raises:
        ResolutionError: If the grid cannot bracket a threshold.
    """
    inv_alpha = 1.0 / alpha
    grid = GnGrid.initial(alpha, grid_size).advance()
    xs, us = grid.xs, grid.us
    gvals = grid.gvals.copy()
    value = v2_closed_form(alpha)
    records = DpTraceList.empty()
    report_at = 10
    for n in range(2, N + 1):
        b, i = _solve_threshold(alpha, xs, us, gvals, value, n)
        scale = n**inv_alpha
        record = DpTrace(n=n, V1=float(gvals[-1]), V2=value, b_n=b, W_n=scale * value, B_n=scale * b)
        records.append(record)
        if on_stage is not None:
            on_stage(GnGrid(alpha=alpha, n=n, xs=xs, gvals=gvals.copy()), record)
        if n == report_at:
            logger.debug("stage %d: W_n=%.8f B_n^alpha=%.6f", n, record.W_n, record.B_n**alpha)
            report_at *= 10
        if n < N:
            value = _next_value(us, gvals, i, b, alpha, value)
            gvals = _g_step(alpha, gvals)
    logger.info("dp sweep alpha=%g to N=%d: W_N=%.8f", alpha, N, records[-1].W_n)
    return records


class FnHn(BaseModel):
    """``f_n`` and ``h_n`` sampled at ``y = n x**alpha``, including ``y = 0``."""

    model_config = _array_config

    alpha: Alpha
    n: PositiveInt
    ys: np.ndarray
    f: np.ndarray
    h: np.ndarray


@validate_call(config=ConfigDict(arbitrary_types_allowed=True))
def fn_hn(alpha: Alpha, grid: GnGrid) -> FnHn:
    """Sample ``f_n(y) = g_n(x) / x`` and ``h_n(y) = y**(1/alpha) f_n(y)``.

    ``f_n(0) = 1`` and ``h_n(0) = 0`` by continuity.
    """
    ys = np.concatenate(([0.0], grid.n * grid.us))
    f = np.concatenate(([1.0], grid.gvals / grid.xs))
    h = np.concatenate(([0.0], grid.n ** (1.0 / alpha) * grid.gvals))
    return FnHn(alpha=alpha, n=grid.n, ys=ys, f=f, h=h)


class SandwichResiduals(BaseModel):
    """Extremes of ``eps_n = f - f_n`` and ``eps_n - y/(2n)`` over ``y`` in (0, n]."""

    model_config = ConfigDict(frozen=True)

    n: int
    min_eps: float
    max_eps: float
    max_excess: float

    def holds(self, tol: float | None = None) -> bool:
        """``0 < eps_n < y/(2n)`` up to ``tol``, default ``8 n`` machine epsilons.

        At small ``y`` the residual ``eps_n ~ y**2 / n`` sinks below the
        rounding error of ``g_n / x`` accumulated over ``n`` iterations.
        """
        tol = 8.0 * self.n * np.finfo(float).eps if tol is None else tol
        return self.min_eps > -tol and self.max_excess < tol


def sandwich_residuals(alpha: float, grid: GnGrid) -> SandwichResiduals:
    """Discretization monitor: both bounds hold iff ``min_eps > 0`` and ``max_excess < 0``."""
    sampled = fn_hn(alpha, grid)
    ys, f_n = sampled.ys[1:], sampled.f[1:]
    eps = f_limit(alpha, ys) - f_n
    excess = eps - ys / (2.0 * grid.n)
    return SandwichResiduals(
        n=grid.n, min_eps=float(eps.min()), max_eps=float(eps.max()), max_excess=float(excess.max())
    )


class RateFit(BaseModel):
    """Least-squares fit ``W_n = d + a / n`` over the tail of a sweep."""

    model_config = ConfigDict(frozen=True)

    a: float
    d_fit: float
    d_alpha: float
    first_n: int


def fit_rate(trace: DpTraceList, d_alpha: float, *, tail: float = 0.5) -> RateFit:
    """Estimate the ``1/n`` coefficient of ``W_n`` over the last ``tail`` share of stages."""
    n = trace.column("n")
    first_n = int(n[int((1.0 - tail) * (len(n) - 1))])
    window = trace.where(n__gte=first_n)
    a, d_fit = np.polyfit(1.0 / window.column("n"), window.column("W_n"), 1)
    return RateFit(a=float(a), d_fit=float(d_fit), d_alpha=d_alpha, first_n=first_n)
