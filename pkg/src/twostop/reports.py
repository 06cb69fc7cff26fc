"""CSV and JSON reports.

Records are flat mappings of column name to value. CSV floats carry six
significant digits; JSON keeps full double precision. Both are UTF-8 with LF
line endings.

Classes:
    ReportFormat: csv or json.

Functions:
    write_report: Serialize records to a path, or return the text.
    read_report: Parse a report back into a DataFrame.
"""

import logging
from collections.abc import Iterable, Mapping
from enum import StrEnum
from pathlib import Path
from typing import Any

import pandas as pd

__all__ = ["ReportFormat", "read_report", "write_report"]

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.6g"


class ReportFormat(StrEnum):
    """Serialization of a report."""

    CSV = "csv"
    JSON = "json"

    @classmethod
    def from_path(cls, path: Path) -> "ReportFormat":
        """Infer the format from a file suffix."""
        try:
            return cls(path.suffix.lstrip(".").lower())
        except ValueError:
            raise ValueError(f"cannot infer a report format from {path.name!r}") from None


def write_report(
    records: Iterable[Mapping[str, Any]],
    path: Path | None,
    fmt: ReportFormat = ReportFormat.CSV,
    *,
    columns: list[str] | None = None,
) -> str | None:
    """Write ``records`` to ``path``; with no path return the serialized text.

    Raises:
        OSError: If ``path`` cannot be written.
    """
    fmt = ReportFormat(fmt)
    frame = pd.DataFrame.from_records(list(records), columns=columns)
    if fmt is ReportFormat.CSV:
        text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    else:
        text = frame.to_json(orient="records", indent=2, double_precision=15) + "\n"
    if path is None:
        return text
    path.write_text(text, encoding="utf-8", newline="\n")
    logger.info("wrote %d rows to %s", len(frame), path)
    return None


def read_report(path: Path, fmt: ReportFormat | None = None) -> pd.DataFrame:
    """Parse a report written by ``write_report``."""
    fmt = ReportFormat(fmt) if fmt else ReportFormat.from_path(path)
    if fmt is ReportFormat.CSV:
        return pd.read_csv(path, encoding="utf-8")
    return pd.read_json(path, orient="records", encoding="utf-8", precise_float=True)
