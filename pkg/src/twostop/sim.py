"""Monte Carlo evaluation of the one-choice, two-choice and prophet policies.

Variables arrive as ``X_n, X_{n-1}, ..., X_1``; the index counts how many
remain including the current one. The two-choice policy reads:

=========  ==========================================  =====================
stage      condition                                   action
=========  ==========================================  =====================
k (none)   ``X_k < b_{k-1}``                           first choice ``X_k``
1 (none)   always                                      payoff ``X_1``
m < k      ``X_m < g_{m-1}(X_k)``                      payoff ``X_m``
end        no second choice                            payoff ``X_k``
=========  ==========================================  =====================

with ``b_1 = 1`` and ``g_0`` the identity. For ``n = 3``:

=======================  =================  ====================================
trace ``(X_3, X_2, X_1)``  first choice       payoff
=======================  =================  ====================================
``X_3 < b_2``            ``X_3``            ``X_2`` if ``X_2 < g(X_3)``, else ``min(X_3, X_1)``
``X_3 >= b_2``           ``X_2``            ``min(X_2, X_1)``
=======================  =================  ====================================

Ties never trigger a choice: every comparison is strict.

Trials run in blocks of fixed size. Block ``i`` draws from the ``i``-th
spawned child of the seed, so a run depends on the seed only, never on the
number of worker threads.

Classes:
    Policy: Which policy a report describes.
    PolicyTable: First-choice thresholds for one horizon.
    MomentEstimate, MomentAccumulator: Scaled moment estimates.
    SimReport: Mean, standard error and scaled mean of one run.

Functions:
    simulate_payoffs, run_two_choice, run_one_choice, run_prophet,
    scaled_moment, two_choice_decisions, n3_policy_oracle.
"""

import logging
import math
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from enum import StrEnum
from typing import Annotated, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator, validate_call
from scipy.integrate import dblquad

from twostop.dist import PowerLawDist, sample_many, spawn_streams
from twostop.dp import DpTraceList, iterate_g, v2_closed_form
from twostop.exceptions import HorizonMismatchError
from twostop.models import Alpha, PositiveFloat, PositiveInt
from twostop.utils import monotone_root

__all__ = [
    "MIN_TRIALS",
    "MomentAccumulator",
    "MomentEstimate",
    "Policy",
    "PolicyTable",
    "SimReport",
    "n3_policy_oracle",
    "run_one_choice",
    "run_prophet",
    "run_two_choice",
    "scaled_moment",
    "simulate_payoffs",
    "two_choice_decisions",
]

logger = logging.getLogger(__name__)

MIN_TRIALS = 1000
BLOCK_ELEMENTS = 2**20

Seed = int | np.random.SeedSequence | None


class Policy(StrEnum):
    """The stopping policies the simulator runs."""

    ONE_CHOICE = "one_choice"
    TWO_CHOICE = "two_choice"
    PROPHET = "prophet"


class PolicyTable(BaseModel):
    """First-choice thresholds ``b_1, ..., b_{n-1}`` for horizon ``n``.

    Attributes:
        alpha: Shape parameter of the table's distribution.
        n: Horizon.
        b: ``b[k] = b_k`` for ``k = 1..n-1``; ``b[0]`` is unused.
        scale: The table applies to ``scale * X`` with ``X ~ U^alpha``.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    alpha: Alpha
    n: PositiveInt
    b: np.ndarray
    scale: PositiveFloat = 1.0

    @model_validator(mode="after")
    def _check_thresholds(self) -> Self:
        if len(self.b) != self.n:
            raise ValueError(f"expected {self.n} threshold slots, got {len(self.b)}")
        if self.n > 2 and np.any(np.diff(self.b[1:]) > 1e-12 * self.scale):
            raise ValueError("thresholds b_k must be non-increasing in k")
        return self

    @classmethod
    def from_sweep(cls, trace: DpTraceList, alpha: float, n: int) -> Self:
        """Read ``b_2..b_{n-1}`` from a sweep reaching ``n - 1``; ``b_1 = 1``.

        Raises:
            HorizonMismatchError: If the sweep stops short of ``n - 1``.
        """
        b = np.full(n, np.nan)
        if n > 1:
            b[1] = 1.0
        if n > 2:
            last = trace[-1].n if len(trace) else 1
            if last < n - 1:
                raise HorizonMismatchError(f"sweep ends at n={last}, horizon {n} needs b_{n - 1}")
            b[2:] = [trace.at(k).b_n for k in range(2, n)]
        return cls(alpha=alpha, n=n, b=b)

    def rescaled(self, c: float) -> Self:
        """The table for ``c * X``: thresholds scale by ``c``."""
        return self.__class__(alpha=self.alpha, n=self.n, b=self.b * c, scale=self.scale * c)

    def g(self, x: np.ndarray | float) -> np.ndarray | float:
        """``E[min(scale X, x)] = x - scale * (x/scale)**(alpha+1) / (alpha+1)``."""
        return x - self.scale * (x / self.scale) ** (self.alpha + 1.0) / (self.alpha + 1.0)


def two_choice_decisions(xs: np.ndarray | list[float], table: PolicyTable) -> tuple[int | None, int | None, float]:
    """Walk one sequence through the two-choice policy.

    Args:
        xs: ``xs[m - 1] = X_m`` for ``m = 1..n``.
        table: Thresholds for horizon ``len(xs)``.

    Returns:
        ``(first_stage, second_stage, payoff)``; a stage is None when no
        choice happened there.
    """
    n = len(xs)
    if n != table.n:
        raise HorizonMismatchError(f"sequence of length {n} against a table for n={table.n}")
    for k in range(n, 0, -1):
        x_k = xs[k - 1]
        if k == 1:
            return None, None, float(x_k)
        if x_k < table.b[k - 1]:
            guarantee = x_k
            iterates = [x_k]
            for _ in range(k - 2):
                iterates.append(table.g(iterates[-1]))
            for m in range(k - 1, 0, -1):
                if xs[m - 1] < iterates[m - 1]:
                    return k, m, float(xs[m - 1])
            return k, None, float(guarantee)
    raise AssertionError("unreachable")  # pragma: no cover


def _draw(dist: PowerLawDist, stream: np.random.Generator, trials: int, n: int, scale: float) -> np.ndarray:
    # column m - 1 holds X_m
    return scale * sample_many(dist, stream, (trials, n))


def _two_choice_block(x: np.ndarray, table: PolicyTable) -> np.ndarray:
    trials, n = x.shape
    rows = np.arange(trials)
    first = np.zeros(trials, dtype=int)
    for k in range(n, 1, -1):
        take = (first == 0) & (x[:, k - 1] < table.b[k - 1])
        first[take] = k
    payoff = x[:, 0].copy()
    chosen = first > 0
    if not np.any(chosen):
        return payoff
    guarantee = x[rows, np.maximum(first, 1) - 1]
    payoff[chosen] = guarantee[chosen]
    # iterates[:, t] = g_t(first choice)
    iterates = np.empty((trials, n))
    iterates[:, 0] = guarantee
    for t in range(1, n):
        iterates[:, t] = table.g(iterates[:, t - 1])
    second = np.zeros(trials, dtype=int)
    for m in range(n - 1, 0, -1):
        take = chosen & (second == 0) & (m < first) & (x[:, m - 1] < iterates[:, m - 1])
        second[take] = m
    taken = second > 0
    payoff[taken] = x[rows[taken], second[taken] - 1]
    return payoff


def _one_choice_block(x: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    trials, n = x.shape
    payoff = x[:, 0].copy()
    stopped = np.zeros(trials, dtype=bool)
    for k in range(n, 1, -1):
        take = ~stopped & (x[:, k - 1] < thresholds[k - 1])
        payoff[take] = x[take, k - 1]
        stopped |= take
    return payoff


def _prophet_block(x: np.ndarray) -> np.ndarray:
    return x.min(axis=1)


def _run_blocks(
    dist: PowerLawDist,
    n: int,
    trials: int,
    seed: Seed,
    play: Callable[[np.ndarray], np.ndarray],
    *,
    scale: float = 1.0,
    workers: int = 1,
) -> np.ndarray:
    block = max(1, BLOCK_ELEMENTS // n)
    sizes = [min(block, trials - start) for start in range(0, trials, block)]
    streams = spawn_streams(seed if seed is not None else np.random.SeedSequence(), len(sizes))

    def run(i: int) -> np.ndarray:
        return play(_draw(dist, streams[i], sizes[i], n, scale))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    logger.debug("simulated %d trials of horizon %d in %d blocks", trials, n, len(sizes))
    return np.concatenate(parts)


@validate_call(config=ConfigDict(arbitrary_types_allowed=True))
def simulate_payoffs(
    dist: PowerLawDist,
    policy: Policy,
    n: PositiveInt,
    trials: PositiveInt,
    seed: Seed = None,
    *,
    table: PolicyTable | None = None,
    thresholds: np.ndarray | None = None,
    workers: PositiveInt = 1,
) -> np.ndarray:
    """Per-trial payoffs of ``policy`` at horizon ``n``.

    Args:
        dist: Distribution of the draws.
        policy: Policy to play.
        n: Horizon.
        trials: Number of independent sequences.
        seed: Root seed; None draws fresh entropy.
        table: Required for the two-choice policy; its ``scale`` multiplies the draws.
        thresholds: ``V_k^1`` for ``k = 0..n-1``; required for the one-choice policy.
        workers: Threads consuming blocks.

    Raises:
        HorizonMismatchError: If ``table`` or ``thresholds`` do not cover horizon ``n``.
    """
    if policy is Policy.TWO_CHOICE:
        if table is None:
            raise ValueError("the two-choice policy needs a PolicyTable")
        if table.n != n:
            raise HorizonMismatchError(f"table built for n={table.n}, requested n={n}")
        if table.alpha != dist.alpha:
            raise ValueError(f"table alpha {table.alpha} differs from distribution alpha {dist.alpha}")
        return _run_blocks(
            dist, n, trials, seed, lambda x: _two_choice_block(x, table), scale=table.scale, workers=workers
        )
    if policy is Policy.ONE_CHOICE:
        if thresholds is None:
            raise ValueError("the one-choice policy needs V^1 thresholds")
        if len(thresholds) < n:
            raise HorizonMismatchError(f"{len(thresholds)} thresholds cannot serve horizon n={n}")
        return _run_blocks(dist, n, trials, seed, lambda x: _one_choice_block(x, thresholds), workers=workers)
    return _run_blocks(dist, n, trials, seed, _prophet_block, workers=workers)


class MomentEstimate(BaseModel):
    """Estimate of ``E[(n**(1/alpha) payoff)**r]``."""

    model_config = ConfigDict(frozen=True)

    r: float
    mean: float
    stderr: float
    count: int


class MomentAccumulator:
    """Running sum and sum of squares of ``(scale * payoff)**r``.

    Accumulators merge associatively, so blocks can be folded in any grouping.
    """

    def __init__(self, r: float, scale: float) -> None:  # noqa: D107
        if r <= 0:
            raise ValueError(f"r must be positive, got {r}")
        self.r = r
        self.scale = scale
        self.count = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, payoffs: np.ndarray) -> None:
        """Fold in a block of raw payoffs."""
        powered = (self.scale * np.asarray(payoffs, dtype=float)) ** self.r
        self.count += powered.size
        self.total += float(powered.sum())
        self.total_sq += float(np.square(powered).sum())

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """A new accumulator holding both."""
        if (other.r, other.scale) != (self.r, self.scale):
            raise ValueError("cannot merge accumulators of different order or scale")
        merged = MomentAccumulator(self.r, self.scale)
        merged.count = self.count + other.count
        merged.total = self.total + other.total
        merged.total_sq = self.total_sq + other.total_sq
        return merged

    def estimate(self) -> MomentEstimate:
        """Mean and standard error of what was added."""
        if self.count < 2:
            raise ValueError("need at least two payoffs for a standard error")
        mean = self.total / self.count
        variance = max(self.total_sq / self.count - mean * mean, 0.0) * self.count / (self.count - 1)
        return MomentEstimate(r=self.r, mean=mean, stderr=math.sqrt(variance / self.count), count=self.count)


def scaled_moment(payoff_blocks: Iterable[np.ndarray], n: int, alpha: float, r: float) -> MomentEstimate:
    """``E[(n**(1/alpha) payoff)**r]`` over a stream of payoff blocks."""
    accumulator = MomentAccumulator(r, n ** (1.0 / alpha))
    for payoffs in payoff_blocks:
        accumulator.add(payoffs)
    return accumulator.estimate()


class SimReport(BaseModel):
    """Summary of one simulation run.

    Attributes:
        policy: Policy played.
        alpha: Shape parameter.
        n: Horizon.
        trials: Number of sequences, at least ``MIN_TRIALS``.
        mean: Mean payoff.
        stderr: Sample standard deviation over ``sqrt(trials)``.
        scaled_mean: ``n**(1/alpha) * mean``.
        moment_r: Optional scaled moment estimate.
    """

    model_config = ConfigDict(frozen=True)

    policy: Policy
    alpha: float
    n: int
    trials: Annotated[int, Field(ge=MIN_TRIALS)]
    mean: float
    stderr: float
    scaled_mean: float
    moment_r: MomentEstimate | None = None

    @classmethod
    def from_payoffs(
        cls, policy: Policy, alpha: float, n: int, payoffs: np.ndarray, moment_r: float | None = None
    ) -> Self:
        """Summarize raw payoffs."""
        moment = scaled_moment([payoffs], n, alpha, moment_r) if moment_r is not None else None
        report = cls(
            policy=policy,
            alpha=alpha,
            n=n,
            trials=payoffs.size,
            mean=float(payoffs.mean()),
            stderr=float(payoffs.std(ddof=1) / math.sqrt(payoffs.size)),
            scaled_mean=n ** (1.0 / alpha) * float(payoffs.mean()),
            moment_r=moment,
        )
        logger.info("%s alpha=%g n=%d: mean=%.6g +/- %.2g", policy, alpha, n, report.mean, report.stderr)
        return report

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        """Whether ``value`` lies within ``sigmas`` standard errors of the mean."""
        return abs(self.mean - value) <= sigmas * self.stderr


def run_two_choice(
    dist: PowerLawDist,
    table: PolicyTable,
    trials: int,
    seed: Seed = None,
    *,
    n: int | None = None,
    workers: int = 1,
    moment_r: float | None = None,
) -> SimReport:
    """Simulate the optimal two-choice policy.

    Raises:
        HorizonMismatchError: If ``n`` is given and differs from ``table.n``.
    """
    n = table.n if n is None else n
    payoffs = simulate_payoffs(dist, Policy.TWO_CHOICE, n, trials, seed, table=table, workers=workers)
    return SimReport.from_payoffs(Policy.TWO_CHOICE, dist.alpha, n, payoffs, moment_r)


def run_one_choice(
    dist: PowerLawDist,
    thresholds: np.ndarray,
    trials: int,
    seed: Seed = None,
    *,
    n: int | None = None,
    workers: int = 1,
    moment_r: float | None = None,
) -> SimReport:
    """Simulate the optimal one-choice policy: stop at the first ``X_k < V_{k-1}^1``."""
    thresholds = np.asarray(thresholds, dtype=float)
    n = len(thresholds) if n is None else n
    payoffs = simulate_payoffs(dist, Policy.ONE_CHOICE, n, trials, seed, thresholds=thresholds, workers=workers)
    return SimReport.from_payoffs(Policy.ONE_CHOICE, dist.alpha, n, payoffs, moment_r)


def run_prophet(
    dist: PowerLawDist,
    n: int,
    trials: int,
    seed: Seed = None,
    *,
    workers: int = 1,
    moment_r: float | None = None,
) -> SimReport:
    """Simulate the prophet: the payoff is the minimum of all ``n`` draws."""
    payoffs = simulate_payoffs(dist, Policy.PROPHET, n, trials, seed, workers=workers)
    return SimReport.from_payoffs(Policy.PROPHET, dist.alpha, n, payoffs, moment_r)


@validate_call
def n3_policy_oracle(alpha: Alpha, *, epsabs: float = 1e-11) -> float:
    """Expected two-choice payoff at ``n = 3`` by two-dimensional quadrature.

    ``X_1`` is integrated analytically, leaving a payoff over ``(X_3, X_2)``
    integrated in ``u = x**alpha`` on the pieces cut out by ``x_3 = b_2`` and
    ``x_2 = g(x_3)``. ``b_2`` is solved independently of the dp grid.
    """
    inv = 1.0 / alpha

    def g(x: float) -> float:
        return x - x ** (alpha + 1.0) / (alpha + 1.0)

    v2 = v2_closed_form(alpha)
    b2 = monotone_root(lambda x: iterate_g(alpha, x, 2) - v2, 0.0, 1.0, xtol=1e-14)
    b2_u = b2**alpha

    def cut(u3: float) -> float:
        return g(u3**inv) ** alpha

    second, _ = dblquad(lambda u2, u3: u2**inv, 0.0, b2_u, 0.0, cut, epsabs=epsabs)
    fallback, _ = dblquad(lambda u2, u3: g(u3**inv), 0.0, b2_u, cut, 1.0, epsabs=epsabs)
    late, _ = dblquad(lambda u2, u3: g(u2**inv), b2_u, 1.0, 0.0, 1.0, epsabs=epsabs)
    return float(second + fallback + late)
