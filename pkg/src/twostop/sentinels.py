"""Provides a singleton token for "no default supplied".

See: https://peps.python.org/pep-0484/#support-for-singleton-types-in-unions

Classes:
    Missing (enum.Enum): An enumeration holding the missing value token.

Constants:
    MISSING (Missing): The token itself; compare with ``is``.
"""

from enum import Enum


class Missing(Enum):  # noqa: D101
    token = 0


MISSING = Missing.token
