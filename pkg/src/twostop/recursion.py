"""The generic scaled recursion and the bounds built from it.

For a monotone kernel ``q`` with ``q(0) = 0`` the recursion

    Z_{n+1} = ((n+1)/n)**(1/alpha) * (1/n) * int_0^n min(q(y), Z_n) dy

started at ``Z_m = c > 0`` converges to ``q(b)`` where ``b`` is the root of
``Q(y) = int_0^y q + (1/alpha - y) q(y)``. With ``q = h`` it bounds ``W_n``
from above, with ``q = k_j`` from below, and with ``q = y**(1/alpha)`` it
reproduces the one-choice values exactly.

Classes:
    RecursionSpec: Kernel, shape and starting point.
    RecursionState: ``(n, Z_n)`` with an optional ring of recent states.
    StopRule: Budget and tolerances for ``run_to_convergence``.
    ConvergenceReport: Final value plus trap and drift diagnostics.
    SandwichTriple, SandwichReport: Output of ``sandwich_bounds``.
    MomentTrajectory: Output of ``moment_recursion``.
    Growth: Outcome of ``classify_growth``.

Functions:
    step, run_to_convergence, sandwich_bounds, admissible_j,
    moment_recursion, classify_growth, one_choice_recursion,
    one_choice_thresholds.
"""

import logging
import math
from collections import deque
from collections.abc import Sequence
from enum import StrEnum
from typing import Annotated, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator, validate_call

from twostop.dp import DpTraceList, dp_sweep, one_choice_values
from twostop.exceptions import ConvergenceError, InvariantViolation
from twostop.kernels import Kernel, LimitKernel, PowerKernel, SandwichKernel, check_kernel
from twostop.limits import q_function, solve_q_root
from twostop.models import Alpha, PositiveFloat, PositiveInt

__all__ = [
    "ConvergenceReport",
    "Growth",
    "MomentTrajectory",
    "RecursionSpec",
    "RecursionState",
    "SandwichReport",
    "SandwichTriple",
    "StopRule",
    "admissible_j",
    "classify_growth",
    "moment_recursion",
    "one_choice_recursion",
    "one_choice_thresholds",
    "run_to_convergence",
    "sandwich_bounds",
    "step",
]

logger = logging.getLogger(__name__)

ORDERING_ATOL = 1e-9
DEFAULT_J_CANDIDATES: tuple[int, ...] = tuple(2**k for k in range(1, 13))


class RecursionSpec(BaseModel):
    """A kernel, a shape parameter and a starting point ``Z_m = c``.

    Attributes:
        alpha: Shape parameter.
        kernel: Non-decreasing ``q`` with ``q(0) = 0``.
        m: Starting index.
        c: Starting value.
    """

    model_config = ConfigDict(frozen=True)

    alpha: Alpha
    kernel: Kernel
    m: PositiveInt = 1
    c: PositiveFloat

    @model_validator(mode="after")
    def _check_kernel(self) -> Self:
        upper = min(self.kernel.cap, 10.0 * (1.0 + 1.0 / self.alpha))
        check_kernel(self.kernel, upper)
        return self

    def initial_state(self, history_size: int = 0) -> "RecursionState":
        """``Z_m = c``."""
        history = ((self.m, self.c),) if history_size else ()
        return RecursionState(n=self.m, Z=self.c, history=history, history_size=history_size)


class RecursionState(BaseModel):
    """``Z_n`` at index ``n``.

    Attributes:
        n: Current index.
        Z: Current value, always positive.
        history: The most recent ``(n, Z_n)`` pairs, oldest first.
        history_size: Capacity of ``history``; 0 keeps none.
    """

    model_config = ConfigDict(frozen=True)

    n: PositiveInt
    Z: PositiveFloat
    history: tuple[tuple[int, float], ...] = ()
    history_size: Annotated[int, Field(ge=0)] = 0


def _advance(alpha: float, kernel: Kernel, n: int, z: float) -> float:
    beta = min(kernel.inverse(z), float(n))
    total = kernel.integral(beta) + (n - beta) * z
    return ((n + 1) / n) ** (1.0 / alpha) * total / n


def step(spec: RecursionSpec, state: RecursionState) -> RecursionState:
    """Advance ``Z_n`` to ``Z_{n+1}``.

    The integral splits at ``beta = min(q^-1(Z_n), n)`` into ``int_0^beta q``
    and the flat part ``(n - beta) Z_n``.

    Raises:
        ValueError: If ``state.n < spec.m``.
        MalformedKernelError: If ``q^-1(Z_n)`` cannot be bracketed.
        InvariantViolation: If ``Z_{n+1}`` is not positive.
    """
    if state.n < spec.m:
        raise ValueError(f"state index {state.n} precedes the starting index {spec.m}")
    z_next = _advance(spec.alpha, spec.kernel, state.n, state.Z)
    if not z_next > 0.0:
        raise InvariantViolation("positivity", f"Z_{state.n + 1} = {z_next!r}")
    history = state.history
    if state.history_size:
        history = (*history, (state.n + 1, z_next))[-state.history_size :]
    return RecursionState.model_construct(
        n=state.n + 1, Z=z_next, history=history, history_size=state.history_size
    )


class StopRule(BaseModel):
    """When ``run_to_convergence`` stops and how it judges the run.

    Attributes:
        max_n: Last index to reach.
        stall_tol: Stop once ``n |Z_{n+1} - Z_n| < stall_tol``.
        delta: Half-width of the trap band around the limit.
        n0: First index at which trap and drift are checked.
        strict: Raise ``ConvergenceError`` instead of reporting when ``max_n`` is hit.
        window: Number of trailing states kept in the report.
    """

    model_config = ConfigDict(frozen=True)

    max_n: PositiveInt = 10**5
    stall_tol: PositiveFloat = 1e-5
    delta: PositiveFloat = 0.01
    n0: PositiveInt = 100
    strict: bool = False
    window: PositiveInt = 16


class ConvergenceReport(BaseModel):
    """What ``run_to_convergence`` saw.

    Attributes:
        final_n: Index of the last value.
        final_Z: The last value.
        converged: Whether the stall tolerance was met before ``max_n``.
        target: ``q(b)`` for the root ``b`` of ``Q``, when that root exists.
        trap_entry: First ``n >= n0`` with ``|Z_n - target| <= delta``.
        trap_held: Whether ``Z_n`` stayed in the band after ``trap_entry``.
        drift_violations: Steps beyond ``n0`` outside the band that moved away from ``target``.
        window: Trailing ``(n, Z_n)`` pairs.
        zs: Every value from ``Z_m`` to ``Z_final``.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    final_n: int
    final_Z: float
    converged: bool
    target: float | None
    trap_entry: int | None
    trap_held: bool | None
    drift_violations: int
    window: list[tuple[int, float]]
    zs: np.ndarray


def _target(alpha: float, kernel: Kernel) -> float | None:
    try:
        return kernel(solve_q_root(alpha, kernel))
    except ValueError as err:
        logger.debug("no root of Q for %r: %s", kernel, err)
        return None


def run_to_convergence(spec: RecursionSpec, stop: StopRule | None = None) -> ConvergenceReport:
    """Iterate ``step`` until the recursion stalls or reaches ``stop.max_n``.

    Raises:
        ConvergenceError: If ``stop.strict`` and ``max_n`` was reached first.
    """
    stop = stop or StopRule()
    target = _target(spec.alpha, spec.kernel)
    n, z = spec.m, spec.c
    zs = [z]
    window: deque[tuple[int, float]] = deque([(n, z)], maxlen=stop.window)
    converged = False
    drift_violations = 0
    trap_entry: int | None = None
    trap_held: bool | None = None
    while n < stop.max_n:
        z_next = _advance(spec.alpha, spec.kernel, n, z)
        if not z_next > 0.0:
            raise InvariantViolation("positivity", f"Z_{n + 1} = {z_next!r}")
        if target is not None and n >= stop.n0:
            below, above = z < target - stop.delta, z > target + stop.delta
            if (below and z_next <= z) or (above and z_next >= z):
                drift_violations += 1
            inside = abs(z - target) <= stop.delta
            if trap_entry is None and inside:
                trap_entry, trap_held = n, True
            elif trap_entry is not None and not inside:
                trap_held = False
        stalled = n * abs(z_next - z) < stop.stall_tol
        n, z = n + 1, z_next
        zs.append(z)
        window.append((n, z))
        if stalled:
            converged = True
            break
    if not converged:
        msg = f"no stall below {stop.stall_tol} by n={n}; last states {list(window)[-4:]}"
        if stop.strict:
            raise ConvergenceError(msg)
        logger.warning(msg)
    logger.info("recursion stopped at n=%d, Z=%.8f (target %s)", n, z, target)
    return ConvergenceReport(
        final_n=n,
        final_Z=z,
        converged=converged,
        target=target,
        trap_entry=trap_entry,
        trap_held=trap_held,
        drift_violations=drift_violations,
        window=list(window),
        zs=np.asarray(zs),
    )


@validate_call
def admissible_j(
    alpha: Alpha,
    cap: PositiveFloat | None = None,
    candidates: Sequence[int] = DEFAULT_J_CANDIDATES,
) -> int:
    """Smallest ``j`` whose ``k_j`` increases on (0, A] with ``K_j(A) < 0``.

    Raises:
        ValueError: If no candidate qualifies.
    """
    cap = cap or SandwichKernel.default_cap(alpha)
    for j in sorted(candidates):
        kernel = SandwichKernel(alpha=alpha, j=j, cap=cap)
        if kernel.is_increasing() and q_function(alpha, kernel, cap) < 0.0:
            logger.debug("alpha=%g, A=%g: smallest admissible j is %d", alpha, cap, j)
            return j
    raise ValueError(f"no admissible j among {sorted(candidates)} for alpha={alpha}, A={cap}")


class SandwichTriple(BaseModel):
    """``(Z^-_{j,N}, W_N, Z^+_N)`` for one ``j``."""

    model_config = ConfigDict(frozen=True)

    j: int
    start: int
    lower: float
    W: float
    upper: float


class SandwichReport(BaseModel):
    """Every triple of one ``sandwich_bounds`` call."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    cap: float
    N: int
    checked: int
    triples: list[SandwichTriple]

    def records(self) -> list[dict[str, float]]:
        """Flat rows for report writers."""
        return [{"alpha": self.alpha, "N": self.N, **t.model_dump()} for t in self.triples]


def sandwich_bounds(
    alpha: float,
    j_list: Sequence[int],
    N: int,  # noqa: N803
    *,
    trace: DpTraceList | None = None,
    cap: float | None = None,
    grid_size: int = 4096,
) -> SandwichReport:
    """Run the upper (``q = h``) and lower (``q = k_j``) recursions alongside ``W_n``.

    The upper recursion starts at ``Z^+_2 = W_2``; the lower one at
    ``Z^-_{m*} = W_{m*}`` with ``m* = max(2, j)``. The ordering
    ``Z^- <= W <= Z^+`` is checked at every ``n <= N``.

    Raises:
        ValueError: If some ``k_j`` is not increasing on (0, A].
        InvariantViolation: On the first ordering violation.
    """
    trace = trace if trace is not None else dp_sweep(alpha, N, grid_size)
    cap = cap or SandwichKernel.default_cap(alpha)
    ws = {record.n: record.W_n for record in trace.where(n__lte=N)}
    if N not in ws:
        raise ValueError(f"trace does not reach N={N}")

    upper_kernel = LimitKernel(alpha=alpha)
    upper = {2: ws[2]}
    for n in range(2, N):
        upper[n + 1] = _advance(alpha, upper_kernel, n, upper[n])

    checked = 0
    triples: list[SandwichTriple] = []
    for j in j_list:
        kernel = SandwichKernel(alpha=alpha, j=j, cap=cap)
        if not kernel.is_increasing():
            raise ValueError(f"k_{j} is not increasing on (0, {cap:.6g}]; choose a larger j")
        start = max(2, j)
        z = ws[start]
        for n in range(start, N + 1):
            if n > start:
                z = _advance(alpha, kernel, n - 1, z)
            if not z - ORDERING_ATOL <= ws[n] <= upper[n] + ORDERING_ATOL:
                raise InvariantViolation(
                    "sandwich_ordering",
                    f"alpha={alpha}, j={j}, n={n}: lower={z!r}, W={ws[n]!r}, upper={upper[n]!r}",
                )
            checked += 1
        triples.append(SandwichTriple(j=j, start=start, lower=z, W=ws[N], upper=upper[N]))
        logger.info("j=%d: %.6f <= W_%d=%.6f <= %.6f", j, z, N, ws[N], upper[N])
    return SandwichReport(alpha=alpha, cap=cap, N=N, checked=checked, triples=triples)


class MomentTrajectory(BaseModel):
    """``S_n(r)`` for ``n = start..N``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    alpha: float
    r: float
    start: int
    values: np.ndarray

    @property
    def ns(self) -> np.ndarray:
        """Indices matching ``values``."""
        return np.arange(self.start, self.start + len(self.values))

    def at(self, n: int) -> float:
        """``S_n(r)``."""
        if not self.start <= n < self.start + len(self.values):
            raise KeyError(f"n={n} is outside [{self.start}, {self.start + len(self.values) - 1}]")
        return float(self.values[n - self.start])


@validate_call(config=ConfigDict(arbitrary_types_allowed=True))
def moment_recursion(
    alpha: Alpha,
    r: PositiveFloat,
    A_seq: np.ndarray | Sequence[float],  # noqa: N803
    N: PositiveInt,  # noqa: N803
    *,
    start: PositiveInt = 1,
    initial: PositiveFloat | None = None,
) -> MomentTrajectory:
    """Iterate ``(n/(n+1))**(r/alpha) S_{n+1} = A_n**(alpha+r) / (n (1+r/alpha)) + (1 - A_n**alpha/n) S_n``.

    Args:
        alpha: Shape parameter.
        r: Moment order.
        A_seq: Scaled thresholds indexed by ``n``; entries below ``start`` are ignored.
        N: Last index.
        start: First index.
        initial: ``S_start``; defaults to ``alpha / (alpha + r) = E[X**r]``,
            exact for ``start = 1``.
    """
    thresholds = np.asarray(A_seq, dtype=float)
    if len(thresholds) < N:
        raise ValueError(f"A_seq holds {len(thresholds)} entries, need indices up to {N - 1}")
    ratio = r / alpha
    values = np.empty(N - start + 1)
    values[0] = initial if initial is not None else alpha / (alpha + r)
    for k, n in enumerate(range(start, N)):
        a_n = thresholds[n]
        stop_here = a_n ** (alpha + r) / (n * (1.0 + ratio))
        values[k + 1] = ((n + 1) / n) ** ratio * (stop_here + (1.0 - a_n**alpha / n) * values[k])
    return MomentTrajectory(alpha=alpha, r=r, start=start, values=values)


class Growth(StrEnum):
    """Verdict of ``classify_growth``."""

    BOUNDED = "bounded"
    DIVERGENT = "divergent"
    UNDETERMINED = "undetermined"


def classify_growth(trajectory: MomentTrajectory, lo: int = 10**3, hi: int = 10**5) -> Growth:
    """Divergent if ``S_hi >= 10 S_lo``; bounded if the window max is below ``2 min + 1``."""
    s_lo, s_hi = trajectory.at(lo), trajectory.at(hi)
    window = trajectory.values[lo - trajectory.start : hi - trajectory.start + 1]
    if s_hi >= 10.0 * s_lo:
        return Growth.DIVERGENT
    if window.max() < 2.0 * window.min() + 1.0:
        return Growth.BOUNDED
    return Growth.UNDETERMINED


@validate_call
def one_choice_recursion(alpha: Alpha, N: PositiveInt) -> np.ndarray:  # noqa: N803
    """``Z_n`` for ``n = 1..N`` from ``q = y**(1/alpha)``, ``Z_1 = g(1)``; index 0 is unused.

    Equals ``n**(1/alpha) V_n^1`` up to rounding.
    """
    spec = RecursionSpec(alpha=alpha, kernel=PowerKernel(alpha=alpha), m=1, c=alpha / (alpha + 1.0))
    values = np.full(N + 1, math.nan)
    values[1] = spec.c
    for n in range(1, N):
        values[n + 1] = _advance(alpha, spec.kernel, n, values[n])
    return values


@validate_call
def one_choice_thresholds(alpha: Alpha, N: PositiveInt) -> np.ndarray:  # noqa: N803
    """``A_n = n**(1/alpha) V_n^1`` for ``n = 0..N``; index 0 holds 0."""
    ns = np.arange(N + 1, dtype=float)
    return ns ** (1.0 / alpha) * one_choice_values(alpha, N)
