"""Monotone kernels ``q`` driving the generic recursion.

Every kernel satisfies ``q(0) = 0``, is non-decreasing, and exposes its
integral ``int_0^s q`` and its sup-inverse. The inverse returns ``+inf`` for
values above ``sup q``, so ``min(q, Z)`` integrates as ``q`` over the whole
range in that case.

Classes:
    Kernel: Abstract base.
    PowerKernel: ``q(y) = y**(1/alpha)``, the one-choice kernel.
    LimitKernel: ``q = h``, the upper sandwich kernel.
    SandwichKernel: ``q = k_j``, the capped lower sandwich kernel.
    CallableKernel: Any user-supplied monotone function.

Functions:
    check_kernel: Verify ``q(0) = 0`` and monotonicity on sampled points.
"""

import logging
import math
from abc import abstractmethod
from collections.abc import Callable
from functools import cache
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import quad

from twostop.exceptions import MalformedKernelError
from twostop.limits import f_limit, h_integral, h_limit, h_sup, solve_b_alpha
from twostop.models import Alpha, PositiveInt
from twostop.utils import expand_bracket, monotone_root

__all__ = [
    "CallableKernel",
    "Kernel",
    "LimitKernel",
    "PowerKernel",
    "SandwichKernel",
    "check_kernel",
]

logger = logging.getLogger(__name__)

INVERSE_RTOL = 1e-12


@cache
def _b_alpha(alpha: float) -> float:
    return solve_b_alpha(alpha).b_alpha


class Kernel(BaseModel):
    """Base class of the recursion kernels.

    Attributes:
        cap: ``q`` is constant on ``[cap, inf)``; ``inf`` when it never flattens.
    """

    model_config = ConfigDict(frozen=True)

    cap: float = math.inf

    @abstractmethod
    def __call__(self, y: float) -> float:
        """Evaluate ``q(y)``."""

    @abstractmethod
    def integral(self, s: float) -> float:
        """Evaluate ``int_0^s q(y) dy``."""

    @abstractmethod
    def inverse(self, t: float) -> float:
        """Evaluate ``sup{y : q(y) < t}``, ``+inf`` if ``t`` exceeds every value of ``q``."""


class PowerKernel(Kernel):
    """``q(y) = y**(1/alpha)``; its recursion reproduces ``n**(1/alpha) V_n^1``."""

    alpha: Alpha

    def __call__(self, y: float) -> float:  # noqa: D102
        return y ** (1.0 / self.alpha)

    def integral(self, s: float) -> float:  # noqa: D102
        p = 1.0 / self.alpha
        return s ** (p + 1.0) / (p + 1.0)

    def inverse(self, t: float) -> float:  # noqa: D102
        return max(t, 0.0) ** self.alpha


class LimitKernel(Kernel):
    """``q = h``; the recursion limit is ``d_alpha``."""

    alpha: Alpha

    def __call__(self, y: float) -> float:  # noqa: D102
        return float(h_limit(self.alpha, y))

    def integral(self, s: float) -> float:  # noqa: D102
        return h_integral(self.alpha, s)

    def inverse(self, t: float) -> float:
        """Closed form: ``h(y)**alpha = y / (1 + a y)`` gives ``y = t**alpha / (1 - a t**alpha)``."""
        if t <= 0.0:
            return 0.0
        a = self.alpha / (self.alpha + 1.0)
        s = t**self.alpha
        if a * s >= 1.0:
            return math.inf
        return s / (1.0 - a * s)

    @property
    def supremum(self) -> float:
        """``(1 + 1/alpha)**(1/alpha)``."""
        return h_sup(self.alpha)


class SandwichKernel(Kernel):
    """``k_j(y) = y**(1/alpha) (f(y) - y/(2j))`` below ``A``, constant from ``A`` on.

    ``k_j < h`` on (0, A]. It is a valid kernel only when ``j`` is large enough
    for ``k_j`` to increase all the way to ``A``; see ``is_increasing``.
    """

    alpha: Alpha
    j: PositiveInt
    cap: float = Field(gt=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _cap_above_root(self) -> Self:
        b_alpha = _b_alpha(self.alpha)
        if self.cap <= b_alpha:
            raise ValueError(f"cap A={self.cap} must exceed b_alpha={b_alpha:.6f}")
        return self

    @classmethod
    def default_cap(cls, alpha: float) -> float:
        """``A = 1.25 b_alpha``, which keeps moderate ``j`` admissible."""
        return 1.25 * _b_alpha(alpha)

    def _raw(self, y: float | np.ndarray) -> float | np.ndarray:
        y = np.asarray(y, dtype=float)
        return y ** (1.0 / self.alpha) * (f_limit(self.alpha, y) - y / (2.0 * self.j))

    @property
    def plateau(self) -> float:
        """``k_j(A)``."""
        return float(self._raw(self.cap))

    def __call__(self, y: float) -> float:  # noqa: D102
        return float(self._raw(min(y, self.cap)))

    def integral(self, s: float) -> float:  # noqa: D102
        head = min(s, self.cap)
        p = 1.0 / self.alpha
        below = h_integral(self.alpha, head) - head ** (p + 2.0) / (2.0 * self.j * (p + 2.0))
        return below + max(s - self.cap, 0.0) * self.plateau

    def inverse(self, t: float) -> float:
        """Bisection on (0, A); ``A`` at the plateau value, ``+inf`` above it."""
        if t <= 0.0:
            return 0.0
        plateau = self.plateau
        if t > plateau:
            return math.inf
        if t == plateau:
            return self.cap
        try:
            return monotone_root(
                lambda y: float(self._raw(y)) - t, 0.0, self.cap, xtol=INVERSE_RTOL * self.cap
            )
        except ValueError as err:
            raise MalformedKernelError(f"k_{self.j}^-1({t}) not bracketed on (0, {self.cap}): {err}") from None

    def is_increasing(self, samples: int = 4097) -> bool:
        """Whether ``k_j`` is strictly increasing on sampled points of (0, A]."""
        ys = np.linspace(0.0, self.cap, samples)[1:]
        return bool(np.all(np.diff(self._raw(ys)) > 0.0))


class CallableKernel(Kernel):
    """A user-supplied monotone ``q``, flat from ``cap`` on when ``cap`` is finite.

    The integral uses QUADPACK and the inverse uses bisection.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    q: Callable[[float], float]

    def __call__(self, y: float) -> float:  # noqa: D102
        return float(self.q(min(y, self.cap)))

    def integral(self, s: float) -> float:  # noqa: D102
        head = min(s, self.cap)
        value, _ = quad(self.q, 0.0, head, limit=200, epsabs=1e-12)
        tail = max(s - self.cap, 0.0) * self.q(self.cap) if math.isfinite(self.cap) else 0.0
        return float(value) + tail

    def inverse(self, t: float) -> float:  # noqa: D102
        if t <= 0.0:
            return 0.0

        def excess(y: float) -> float:
            return self(y) - t

        try:
            if math.isfinite(self.cap):
                top = self.q(self.cap)
                if t > top:
                    return math.inf
                if t == top:
                    return self.cap
                upper = self.cap
            else:
                upper = expand_bracket(excess, 0.0, 1.0)
            return monotone_root(excess, 0.0, upper, xtol=INVERSE_RTOL * upper)
        except ValueError as err:
            raise MalformedKernelError(f"q^-1({t}) could not be bracketed: {err}") from None


def check_kernel(kernel: Kernel, upper: float, samples: int = 513) -> None:
    """Verify ``q(0) = 0`` and ``q`` non-decreasing on ``samples`` points of [0, upper].

    Raises:
        MalformedKernelError: If either condition fails.
    """
    if kernel(0.0) != 0.0:
        raise MalformedKernelError(f"q(0) = {kernel(0.0)!r}, expected 0")
    ys = np.linspace(0.0, upper, samples)
    values = np.array([kernel(float(y)) for y in ys])
    drops = np.flatnonzero(np.diff(values) < 0.0)
    if drops.size:
        y = ys[drops[0]]
        raise MalformedKernelError(f"q decreases after y={y:.6g}")
