"""Error types and value validation shared by every stage."""

import math
import re

# Artifact names derived from crime types must stay inside the output directory
_UNSAFE_NAME_CHARS = re.compile(r"[^A-Za-z0-9._-]")


class CrimeGraphError(Exception):
    """Base class for all toolkit errors."""


class UsageError(CrimeGraphError):
    """Raised when the caller supplied an invalid configuration or flag."""


class ConfigurationError(UsageError):
    """Raised when settings cannot form a valid pipeline configuration."""


class DataError(CrimeGraphError):
    """Raised when input data cannot be turned into a valid artifact."""


class InvalidCoordinateError(DataError):
    """Raised when a latitude or longitude is non-finite or out of range."""


class ColumnNotFoundError(DataError):
    """Raised when a mapped CSV column is missing from the header."""

    def __init__(self, column: str, available: list[str]):
        self.column = column
        self.available = available
        super().__init__(
            f"Column '{column}' not found in CSV header. Available: {', '.join(available)}"
        )


class MapParseError(DataError):
    """Raised when an OSM XML extract is malformed."""

    def __init__(self, message: str, byte_offset: int | None = None):
        self.byte_offset = byte_offset
        if byte_offset is not None:
            message = f"{message} (at byte offset {byte_offset})"
        super().__init__(message)


class NoStreetDataError(DataError):
    """Raised when an extract holds no way matching the highway filter."""


class InterchangeFormatError(DataError):
    """Raised when an artifact file violates its line-based format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyGraphError(DataError):
    """Raised when an operation needs at least one node."""


class DisconnectedGraphError(DataError):
    """Raised when community detection receives a disconnected graph."""


class SpatialIndexError(DataError):
    """Raised when a spatial index cannot be built from the given nodes."""


class ModularityError(DataError):
    """Raised when modularity is undefined (no edge weight)."""


class LayerMismatchError(DataError):
    """Raised when a crime layer does not belong to the graph it is used with."""


class ExportError(DataError):
    """Raised when an output artifact cannot be written."""


class PipelineStageError(CrimeGraphError):
    """Raised when a pipeline stage fails; carries the stage name and cause."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")


def validate_coordinates(lat: float, lon: float) -> None:
    """
    Validate a latitude/longitude pair given in decimal degrees.

    Raises:
        InvalidCoordinateError: If either value is non-finite or out of range
    """
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise InvalidCoordinateError(f"Non-finite coordinate ({lat}, {lon})")
    if not -90.0 <= lat <= 90.0:
        raise InvalidCoordinateError(f"Latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise InvalidCoordinateError(f"Longitude {lon} outside [-180, 180]")


def validate_weight(weight: float, line: int | None = None) -> float:
    """
    Validate an edge weight in meters.

    Raises:
        InterchangeFormatError: If the weight is non-finite or negative
    """
    if not math.isfinite(weight):
        raise InterchangeFormatError(f"non-finite weight {weight!r}", line=line)
    if weight < 0:
        raise InterchangeFormatError(f"negative weight {weight!r}", line=line)
    return weight


def safe_artifact_name(crime_type: str) -> str:
    """Map a crime type to a file-name slug (`LARCENY/THEFT` → `LARCENY_THEFT`)."""
    if not crime_type:
        raise ConfigurationError("Crime type must be a non-empty string")
    slug = _UNSAFE_NAME_CHARS.sub("_", crime_type)
    # Leading dots would produce hidden files
    if slug.startswith("."):
        slug = "_" + slug[1:]
    if len(slug) > 200:
        slug = slug[:200]
    return slug
