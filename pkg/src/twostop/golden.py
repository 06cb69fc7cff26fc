"""The reference limiting-value table, shipped as package data.

Functions:
    golden_table: The whole table as a DataFrame.
    golden_row: One alpha row.
    golden_deviation: Absolute deviations of computed rows from the table.
"""

from collections.abc import Iterable
from functools import cache
from importlib.resources import files

import pandas as pd

from twostop.limits import LimitConstants
from twostop.sentinels import MISSING, Missing

__all__ = ["GOLDEN_COLUMNS", "golden_deviation", "golden_row", "golden_table"]

GOLDEN_COLUMNS = [
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


@cache
def _load() -> pd.DataFrame:
    with files("twostop").joinpath("data/table1.csv").open(encoding="utf-8") as handle:
        return pd.read_csv(handle)


def golden_table() -> pd.DataFrame:
    """A copy of the table, one row per alpha."""
    return _load().copy()


def golden_row(alpha: float, default: dict[str, float] | None | Missing = MISSING) -> dict[str, float] | None:
    """The reference row for ``alpha``.

    Args:
        alpha: One of the tabulated alphas.
        default: Returned when ``alpha`` is not tabulated.

    Raises:
        KeyError: If ``alpha`` is not tabulated and no default is given.
    """
    table = _load()
    matches = table[(table["alpha"] - alpha).abs() < 1e-9]
    if matches.empty:
        if default is MISSING:
            raise KeyError(f"alpha={alpha} is not in the golden table")
        return default
    return {column: float(value) for column, value in matches.iloc[0].items()}


def golden_deviation(rows: Iterable[LimitConstants]) -> pd.DataFrame:
    """``|computed - reference|`` per cell for every tabulated alpha among ``rows``."""
    deviations = []
    for constants in rows:
        printed = golden_row(constants.alpha, default=None)
        if printed is None:
            continue
        computed = constants.as_row()
        deviations.append(
            {"alpha": constants.alpha} | {c: abs(computed[c] - printed[c]) for c in GOLDEN_COLUMNS[1:]}
        )
    return pd.DataFrame.from_records(deviations, columns=GOLDEN_COLUMNS)
