"""Shared pydantic types for twostop records.

Types:
    Alpha: The shape parameter of the U^alpha family, a positive finite float.
    PositiveInt: A strictly positive integer.

Classes:
    Comparison: An enumeration of field comparisons usable in ``where``.
    RecordList: A generic root model holding an ordered list of records.
"""

import operator
from collections.abc import Callable, Iterator
from enum import Enum, member
from typing import Annotated, Any, Generic, Self, SupportsIndex, TypeVar, overload

import numpy as np
from pydantic import BaseModel, Field, RootModel

from twostop.utils import override

Alpha = Annotated[float, Field(gt=0, allow_inf_nan=False)]
PositiveInt = Annotated[int, Field(gt=0)]
PositiveFloat = Annotated[float, Field(gt=0, allow_inf_nan=False)]


def _in_range(value: float, bounds: tuple[float, float]) -> bool:
    return bounds[0] <= value <= bounds[1]


class Comparison(Enum):
    """Comparisons available to ``RecordList.where`` as ``field__suffix``."""

    EXACT = member(operator.eq)
    NE = member(operator.ne)
    GT = member(operator.gt)
    GTE = member(operator.ge)
    LT = member(operator.lt)
    LTE = member(operator.le)
    RANGE = member(_in_range)

    def evaluate(self, value: Any, rhs: Any) -> bool:  # noqa: ANN401
        """Apply the comparison as ``value <op> rhs``."""
        func: Callable[[Any, Any], bool] = self.value
        return bool(func(value, rhs))

    @classmethod
    def split(cls, key: str, *, separator: str = "__") -> tuple[str, "Comparison"]:
        """Split ``"n__gte"`` into ``("n", Comparison.GTE)``.

        A key without a recognised suffix compares with ``EXACT``.
        """
        field, _, suffix = key.rpartition(separator)
        if field and suffix.upper() in cls.__members__:
            return field, cls[suffix.upper()]
        return key, cls.EXACT


RecordT = TypeVar("RecordT", bound=BaseModel)


class RecordList(RootModel[list[RecordT]], Generic[RecordT]):
    """An ordered, filterable list of pydantic records.

    Example:
    ```
    >>> trace = RecordList[DpTrace](root=[...])
    >>> trace.where(n__gte=100).column("W_n")
    array([...])
    ```
    """

    @classmethod
    def empty(cls) -> Self:
        """Create an empty instance of the class."""
        return cls(root=[])

    @override
    def __iter__(self) -> Iterator[RecordT]:  # type: ignore[override]  # noqa: D105
        return iter(self.root)

    @overload
    def __getitem__(self, item: SupportsIndex, /) -> RecordT: ...
    @overload
    def __getitem__(self, item: slice, /) -> list[RecordT]: ...
    def __getitem__(self, item: SupportsIndex | slice) -> RecordT | list[RecordT]:  # noqa: D105
        return self.root[item]

    def __len__(self) -> int:  # noqa: D105
        return len(self.root)

    def append(self, item: RecordT) -> None:
        """Append a record to the end of the list."""
        self.root.append(item)

    def where(self, **conditions: object) -> Self:
        """Return a new list holding the records matching every condition.

        Example:
        ```
        >>> trace.where(n__range=(100, 200), b_n__lt=0.01)
        ```

        Args:
            conditions: ``field__comparison=value`` pairs.
        """
        parsed = [(*Comparison.split(key), rhs) for key, rhs in conditions.items()]
        kept = [
            record
            for record in self.root
            if all(cmp.evaluate(getattr(record, field), rhs) for field, cmp, rhs in parsed)
        ]
        return self.__class__(root=kept)

    def column(self, field: str) -> np.ndarray:
        """Return one field of every record as a float array."""
        return np.array([getattr(record, field) for record in self.root], dtype=float)

    def records(self) -> list[dict[str, Any]]:
        """Dump every record to a plain dictionary, in order."""
        return [record.model_dump(mode="json") for record in self.root]

    @override
    def __repr__(self) -> str:  # noqa: D105
        return f"{self.__class__.__name__}(<{len(self.root)} records>)"
