"""Toolkit configuration using Pydantic Settings."""

from pathlib import Path
from typing import Literal

from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Drivable OSM highway classes used when no filter is configured
DEFAULT_HIGHWAY_CLASSES = (
    "motorway,motorway_link,trunk,trunk_link,primary,primary_link,"
    "secondary,secondary_link,tertiary,tertiary_link,unclassified,"
    "residential,living_street"
)


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables or a key-value config file.

    The config file uses dotenv syntax (``KEY=value`` per line). Command-line
    flags are passed as init arguments and win over both.
    """

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    # Inputs
    graph_path: str | None = Field(
        default=None,
        description="Street map source: OSM XML extract or crimegraph-v1 interchange file",
    )
    graph_format: Literal["auto", "osm", "interchange"] = Field(
        default="auto",
        description="Format of graph_path; 'auto' decides by file suffix",
    )
    crimes_path: str | None = Field(
        default=None,
        description="Crime CSV file (UTF-8, RFC 4180)",
    )

    # Crime CSV column mapping (defaults follow the San Francisco open-data export)
    lat_col: str = "Y"
    lon_col: str = "X"
    category_col: str = "Category"
    id_col: str = "IncidntNum"
    date_col: str | None = "Date"
    csv_has_header: bool = True

    # Analysis scope
    crime_types: str = Field(
        default="",
        description="Comma-separated crime types to analyze (e.g. 'ASSAULT,LARCENY/THEFT')",
    )
    bbox: str | None = Field(
        default=None,
        description="Optional 'south,west,north,east' rectangle in degrees",
    )
    highway_classes: str = Field(
        default=DEFAULT_HIGHWAY_CLASSES,
        description="Comma-separated OSM highway tag values that form the street network",
    )

    # Community detection
    seed: int = 42
    node_weight_mode: Literal["ignore", "self_loop"] = "self_loop"
    self_loop_scale: float | None = Field(
        default=None,
        description="Self-loop affinity per mapped crime; defaults to the mean edge affinity",
        gt=0,
    )
    tolerance: float = Field(default=1e-7, ge=0)
    check_monotone: bool = Field(
        default=False,
        description="Fail detection if modularity ever decreases between passes",
    )
    topology_baseline: bool = Field(
        default=True,
        description="Also detect communities on the pure topology for comparison",
    )

    # Filtering and analysis
    min_size: int = Field(default=100, ge=1)
    top_k: int = Field(default=5, ge=1)
    similarity_variant: Literal["normalized", "raw"] = "normalized"

    # Execution
    out_dir: str = Field(
        default="./data/out",
        description="Directory receiving all artifacts of a run",
    )
    workers: int = Field(default=4, ge=1)
    grid_cell_m: float = Field(
        default=250.0,
        description="Edge length in meters of a spatial-index grid cell",
        gt=0,
    )
    geojson_include_none: bool = False
    community_filter_tsv: bool = Field(
        default=False,
        description="Also write community_filter.tsv with the average and size of every community",
    )

    # Logging
    log_level: str = "INFO"
    log_format: Literal["json", "console"] = "json"

    testing: bool = Field(
        default=False,
        description="Testing mode (skips output directory checks)",
    )

    @property
    def crime_types_list(self) -> list[str]:
        """Parse comma-separated crime types into a list, keeping order."""
        if not self.crime_types:
            return []
        seen: list[str] = []
        for item in self.crime_types.split(","):
            name = item.strip()
            if name and name not in seen:
                seen.append(name)
        return seen

    @property
    def highway_classes_set(self) -> frozenset[str]:
        """Parse comma-separated highway classes into a set."""
        return frozenset(c.strip() for c in self.highway_classes.split(",") if c.strip())

    @property
    def bbox_box(self) -> tuple[float, float, float, float] | None:
        """Parse bbox into (south, west, north, east)."""
        if not self.bbox:
            return None
        return _parse_bbox(self.bbox)

    @model_validator(mode="after")
    def validate_configuration(self) -> "Settings":
        """Validate configuration after all fields are set."""
        if self.lat_col == self.lon_col:
            raise ValueError(f"lat_col and lon_col must differ (both '{self.lat_col}')")

        if self.bbox:
            _parse_bbox(self.bbox)

        if not self.highway_classes_set:
            raise ValueError("highway_classes must name at least one class")

        # Skip filesystem checks in testing mode
        if self.testing:
            return self

        out_path = Path(self.out_dir)
        if out_path.exists() and not out_path.is_dir():
            raise ValueError(f"Output path '{self.out_dir}' exists and is not a directory")

        return self


def _parse_bbox(raw: str) -> tuple[float, float, float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise ValueError(f"bbox must be 'south,west,north,east', got '{raw}'")
    try:
        south, west, north, east = (float(p) for p in parts)
    except ValueError as e:
        raise ValueError(f"bbox values must be numbers, got '{raw}'") from e
    if not (-90 <= south <= north <= 90):
        raise ValueError(f"bbox latitudes must satisfy -90 <= south <= north <= 90, got '{raw}'")
    if not (-180 <= west <= east <= 180):
        raise ValueError(f"bbox longitudes must satisfy -180 <= west <= east <= 180, got '{raw}'")
    return south, west, north, east


def load_settings(config_path: str | Path | None = None, **overrides: object) -> Settings:
    """Build settings from an optional key-value file plus explicit overrides.

    Overrides whose value is None are ignored so unset command-line flags do not
    mask values from the file or the environment.
    """
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file not found: {path}")
        return Settings(_env_file=path, **kwargs)  # type: ignore[call-arg]
    return Settings(**kwargs)  # type: ignore[arg-type]

