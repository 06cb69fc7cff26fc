"""Power-law-at-zero distributions and inverse-CDF sampling.

A member of the family has CDF ``F(x) = x**alpha * L(x)`` near zero. The pure
U^alpha member uses ``L = 1`` on [0, 1]. Sampling always goes through the
quantile transform ``X = F^{-1}(U)`` with an injected uniform stream.

Classes:
    PowerLawDist: The distribution, pure or with a bounded slowly varying factor.
    UniformStream: Protocol of the uniform source consumed by ``sample``.

Functions:
    cdf: Evaluate F.
    quantile: Evaluate the sup-inverse F^{-1}(u).
    sample: Draw one variate from a uniform stream.
    sample_many: Vectorized draws from a uniform stream.
    uniform_stream: A seeded numpy generator.
    spawn_streams: Independent child generators from one seed.
"""

import logging
import math
from collections.abc import Callable
from typing import Protocol, Self, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator, validate_call

from twostop.models import Alpha
from twostop.utils import expand_bracket, first_crossing

__all__ = [
    "PowerLawDist",
    "UniformStream",
    "cdf",
    "quantile",
    "sample",
    "sample_many",
    "spawn_streams",
    "uniform_stream",
]

logger = logging.getLogger(__name__)

QUANTILE_XTOL = 1e-13
_BOUND_GRID = np.geomspace(1e-12, 1.0, 257)


@runtime_checkable
class UniformStream(Protocol):
    """Anything with numpy's ``Generator.random`` signature."""

    def random(self, size: int | tuple[int, ...] | None = None) -> float | np.ndarray: ...  # noqa: D102


class PowerLawDist(BaseModel):
    """A distribution with ``F(x) = x**alpha * L(x)`` and ``F(0) = 0``.

    Attributes:
        alpha: The shape parameter.
        slowly_varying: ``L*`` with ``L*(u) -> 1`` as ``u -> 0``; None for pure U^alpha.
        slowly_varying_bound: Declared bound on ``|L*|``; required with ``slowly_varying``.
        support_cap: Upper end of the support; ``F = 1`` above it.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    alpha: Alpha
    slowly_varying: Callable[[float], float] | None = None
    slowly_varying_bound: float | None = Field(default=None, gt=0, allow_inf_nan=False)
    support_cap: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_slowly_varying(self) -> Self:
        if self.slowly_varying is None:
            if self.support_cap != 1.0:
                raise ValueError("the pure U^alpha member has support_cap 1")
            return self
        if self.slowly_varying_bound is None:
            raise ValueError("a slowly varying factor needs a declared bound")
        cap = self.support_cap if math.isfinite(self.support_cap) else 1e6
        points = _BOUND_GRID * cap
        values = np.array([self.slowly_varying(float(u)) for u in points])
        if not np.all(np.isfinite(values)) or np.any(np.abs(values) > self.slowly_varying_bound):
            raise ValueError(
                f"slowly varying factor exceeds its declared bound {self.slowly_varying_bound}"
            )
        if np.any(values <= 0):
            raise ValueError("slowly varying factor must be positive")
        return self

    @classmethod
    def pure(cls, alpha: float) -> Self:
        """The U^alpha member, ``F(x) = x**alpha`` on [0, 1]."""
        return cls(alpha=alpha)

    @classmethod
    def general(
        cls,
        alpha: float,
        slowly_varying: Callable[[float], float],
        *,
        bound: float,
        support_cap: float = math.inf,
    ) -> Self:
        """A member with a bounded slowly varying factor ``L*``."""
        return cls(
            alpha=alpha,
            slowly_varying=slowly_varying,
            slowly_varying_bound=bound,
            support_cap=support_cap,
        )

    @property
    def is_pure(self) -> bool:
        """Whether this is the pure U^alpha member."""
        return self.slowly_varying is None


def cdf(d: PowerLawDist, x: float) -> float:
    """Evaluate ``F(x)``, clamped to 1 above the support cap.

    Examples:
        >>> cdf(PowerLawDist.pure(2.0), 0.5)
        0.25

    """
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x >= d.support_cap:
        return 1.0
    if d.slowly_varying is None:
        return x**d.alpha
    return min(1.0, x**d.alpha * d.slowly_varying(x))


def quantile(d: PowerLawDist, u: float) -> float:
    """Evaluate ``F^{-1}(u) = sup{x : F(x) < u}``.

    The pure member inverts in closed form; general members bisect the sign of
    ``F(x) >= u`` to within ``QUANTILE_XTOL``, so plateaus of ``F`` resolve to
    their left end.

    Raises:
        ValueError: If ``u`` lies outside (0, 1).
    """
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in the open interval (0, 1), got {u}")
    if d.slowly_varying is None:
        return u ** (1.0 / d.alpha)

    def reached(x: float) -> bool:
        return cdf(d, x) >= u

    upper = d.support_cap
    if not math.isfinite(upper):
        upper = expand_bracket(lambda x: 1.0 if reached(x) else -1.0, 0.0, 1.0)
    return first_crossing(reached, 0.0, upper, xtol=QUANTILE_XTOL)


def sample(d: PowerLawDist, rng_stream: UniformStream) -> float:
    """Draw one variate as ``quantile(d, u)`` with ``u`` from the stream."""
    return quantile(d, float(_open_unit(np.asarray(rng_stream.random(), dtype=float))))


def _open_unit(u: np.ndarray) -> np.ndarray:
    # Generator.random is on [0, 1); the quantile needs (0, 1)
    return np.where(u > 0.0, u, np.nextafter(0.0, 1.0))


def sample_many(d: PowerLawDist, rng_stream: UniformStream, size: int | tuple[int, ...]) -> np.ndarray:
    """Draw an array of variates through the quantile transform."""
    u = _open_unit(np.asarray(rng_stream.random(size), dtype=float))
    if d.slowly_varying is None:
        return u ** (1.0 / d.alpha)
    flat = np.array([quantile(d, float(v)) for v in u.ravel()])
    return flat.reshape(u.shape)


@validate_call
def uniform_stream(seed: int | None = None) -> np.random.Generator:
    """A deterministic uniform stream; the same seed replays the same draws."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_streams(seed: int | np.random.SeedSequence, count: int) -> list[np.random.Generator]:
    """Split one seed into ``count`` independent uniform streams.

    Child ``i`` depends only on the seed and ``i``, never on ``count`` or on
    which thread consumes it.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = (
        np.random.SeedSequence(root.entropy, spawn_key=(*root.spawn_key, i)) for i in range(count)
    )
    return [np.random.default_rng(child) for child in children]
