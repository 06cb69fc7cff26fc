"""Provides small numerical helpers shared across twostop modules.

Functions:
    - coerce_to_float: Coerce a value to a finite float.
    - parse_float_list: Split a comma separated string into floats.
    - expand_bracket: Grow an upper bracket geometrically until a sign change.
    - monotone_root: Bisection root of a monotone scalar function.
    - first_crossing: Where a monotone predicate first holds.
"""

import logging
import math
import sys
from collections.abc import Callable

from scipy.optimize import bisect

__all__ = [
    "coerce_to_float",
    "expand_bracket",
    "first_crossing",
    "monotone_root",
    "override",
    "parse_float_list",
]

if sys.version_info >= (3, 12):  # pragma: no cover
    from typing import override
else:  # pragma: no cover
    from typing_extensions import override

logger = logging.getLogger(__name__)


def coerce_to_float(value: float | int | str) -> float:
    """Coerce a value to a finite float.

    Args:
        value: The value to coerce.

    Returns:
        float: The coerced value.

    Raises:
        ValueError: If the value cannot be coerced or is not finite.
    """
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"Cannot coerce value {value!r} to float.") from None
    if not math.isfinite(result):
        raise ValueError(f"Value {value!r} is not finite.")
    return result


def parse_float_list(text: str, *, separator: str = ",") -> list[float]:
    """Split a separated string into floats.

    Examples:
        >>> parse_float_list("0.5, 1,2")
        [0.5, 1.0, 2.0]

    """
    return [coerce_to_float(part) for part in text.split(separator) if part.strip()]


def expand_bracket(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    *,
    factor: float = 2.0,
    max_doublings: int = 200,
) -> float:
    """Grow ``upper`` until ``func`` changes sign relative to ``func(lower)``.

    Args:
        func: Scalar function, continuous on [lower, inf).
        lower: Fixed lower end of the bracket.
        upper: Initial upper end, must exceed ``lower``.
        factor: Multiplicative growth of the upper end per attempt.
        max_doublings: Give up after this many expansions.

    Returns:
        An upper end with ``func(lower) * func(upper) <= 0``.

    Raises:
        ValueError: If no sign change is found.
    """
    sign = math.copysign(1.0, func(lower))
    for _ in range(max_doublings):
        if math.copysign(1.0, func(upper)) != sign:
            return upper
        logger.debug("bracket [%g, %g] holds no sign change, expanding", lower, upper)
        upper = lower + factor * (upper - lower)
    raise ValueError(f"no sign change found above {lower} within {max_doublings} expansions")


def monotone_root(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    *,
    xtol: float = 1e-12,
) -> float:
    """Bisection root of a monotone function on a sign-changing bracket.

    Args:
        func: Continuous monotone scalar function.
        lower: Lower end of the bracket.
        upper: Upper end of the bracket.
        xtol: Absolute tolerance on the abscissa.

    Returns:
        The root, to within ``xtol``.

    Raises:
        ValueError: If the bracket holds no sign change.
    """
    f_lo, f_hi = func(lower), func(upper)
    if f_lo == 0.0:
        return lower
    if f_hi == 0.0:
        return upper
    if f_lo * f_hi > 0.0:
        raise ValueError(f"[{lower}, {upper}] does not bracket a root")
    return float(bisect(func, lower, upper, xtol=xtol, maxiter=400))


def first_crossing(
    predicate: Callable[[float], bool],
    lower: float,
    upper: float,
    *,
    xtol: float = 1e-12,
) -> float:
    """Smallest ``x`` in [lower, upper] at which a monotone predicate turns true.

    Bisects the sign of the predicate, never a difference that can vanish on a
    plateau, and returns a point within ``xtol`` above the crossing where the
    predicate holds.

    Raises:
        ValueError: If the predicate is false at ``upper``.
    """
    if predicate(lower):
        return lower
    if not predicate(upper):
        raise ValueError(f"predicate is false on all of [{lower}, {upper}]")
    x = float(bisect(lambda v: 1.0 if predicate(v) else -1.0, lower, upper, xtol=xtol, maxiter=400))
    while not predicate(x):
        x = min(x + xtol, upper)
    return x
