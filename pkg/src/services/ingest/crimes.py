"""Crime CSV ingestion with a configurable column mapping."""

import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd
import structlog

from src.models.ingest import BoundingBox, ColumnMapping
from src.services.geo import GeoPoint
from src.utils.validators import ColumnNotFoundError, DataError

logger = structlog.get_logger(__name__)

# Rejection reasons, in report order
REJECT_UNPARSABLE = "unparsable_coordinates"
REJECT_OUT_OF_RANGE = "out_of_range"
REJECT_MISSING_CATEGORY = "missing_category"
REJECT_OUT_OF_BBOX = "out_of_bbox"
REJECT_REASONS = (
    REJECT_UNPARSABLE,
    REJECT_OUT_OF_RANGE,
    REJECT_MISSING_CATEGORY,
    REJECT_OUT_OF_BBOX,
)


@dataclass(frozen=True, slots=True)
class CrimeRecord:
    """One georeferenced crime event."""

    id: str
    category: str
    point: GeoPoint
    timestamp: datetime | None = None

    def __post_init__(self) -> None:
        if not self.category:
            raise ValueError(f"Crime record {self.id!r} has an empty category")


@dataclass
class ParseStats:
    """Row accounting for one CSV file: every row is accepted or rejected."""

    total: int = 0
    accepted: int = 0
    rejected: Counter[str] = field(default_factory=Counter)

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())

    def as_dict(self) -> dict[str, int]:
        out = {"total": self.total, "accepted": self.accepted}
        out.update({reason: self.rejected.get(reason, 0) for reason in REJECT_REASONS})
        return out


def _parse_float(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        return math.nan


def _to_float(column: pd.Series) -> np.ndarray:
    """Exact decimal parsing; unparsable cells become NaN."""
    return column.map(_parse_float).to_numpy(np.float64)


def _resolve_columns(frame: pd.DataFrame, columns: ColumnMapping) -> None:
    available = [str(c) for c in frame.columns]
    for col in columns.required_columns:
        if col not in available:
            raise ColumnNotFoundError(col, available)


def parse_crime_csv(
    path: str | Path,
    columns: ColumnMapping | None = None,
    bbox: BoundingBox | None = None,
) -> tuple[list[CrimeRecord], ParseStats]:
    """
    Read a crime CSV into records.

    Rows with unparsable or out-of-range coordinates, an empty category, or
    (with a bbox) a point outside the box are counted in the returned stats and
    skipped. Record ids default to ``row-N`` (1-based data row) when the id
    column is unset or empty.

    Raises:
        DataError: If the file does not exist or cannot be read as CSV
        ColumnNotFoundError: If a mapped column is missing
    """
    columns = columns or ColumnMapping()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Crime file not found: {path}")

    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            header=0 if columns.has_header else None,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame(columns=columns.required_columns if columns.has_header else [])
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot parse crime file {path}: {e}") from e

    if not columns.has_header:
        frame.columns = [str(c) for c in frame.columns]
    stats = ParseStats(total=len(frame))
    if stats.total == 0:
        if columns.has_header and len(frame.columns) > 0:
            _resolve_columns(frame, columns)
        logger.info("crimes_parsed", path=str(path), **stats.as_dict())
        return [], stats
    _resolve_columns(frame, columns)

    lats = _to_float(frame[columns.lat_col])
    lons = _to_float(frame[columns.lon_col])
    categories = frame[columns.category_col].str.strip()

    parsable = np.isfinite(lats) & np.isfinite(lons)
    in_range = parsable & (np.abs(lats) <= 90.0) & (np.abs(lons) <= 180.0)
    has_category = (categories != "").to_numpy()
    keep = in_range & has_category
    in_box = bbox.mask(lats, lons) if bbox is not None else np.ones(len(frame), dtype=bool)

    stats.rejected[REJECT_UNPARSABLE] = int((~parsable).sum())
    stats.rejected[REJECT_OUT_OF_RANGE] = int((parsable & ~in_range).sum())
    stats.rejected[REJECT_MISSING_CATEGORY] = int((in_range & ~has_category).sum())
    stats.rejected[REJECT_OUT_OF_BBOX] = int((keep & ~in_box).sum())
    keep &= in_box
    stats.accepted = int(keep.sum())

    if columns.id_col is not None:
        ids = frame[columns.id_col].str.strip()
    else:
        ids = pd.Series([""] * len(frame), index=frame.index)
    timestamps: pd.Series | None = None
    if columns.date_col is not None:
        timestamps = pd.to_datetime(frame[columns.date_col], errors="coerce", format="mixed")

    records: list[CrimeRecord] = []
    for row in np.flatnonzero(keep).tolist():
        ts = None
        if timestamps is not None and not pd.isna(timestamps.iat[row]):
            ts = timestamps.iat[row].to_pydatetime()
        records.append(
            CrimeRecord(
                id=ids.iat[row] or f"row-{row + 1}",
                category=categories.iat[row],
                point=GeoPoint(float(lats[row]), float(lons[row])),
                timestamp=ts,
            )
        )

    if stats.rejected_total:
        logger.warning("crime_rows_rejected", path=str(path), **dict(stats.rejected))
    logger.info("crimes_parsed", path=str(path), **stats.as_dict())
    return records, stats


def category_counts(records: list[CrimeRecord]) -> Counter[str]:
    """Number of records per crime type."""
    return Counter(r.category for r in records)
