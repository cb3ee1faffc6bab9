"""Input-side models: CSV column mapping and bounding boxes."""

import numpy as np
from pydantic import BaseModel, Field, model_validator


class ColumnMapping(BaseModel):
    """Where each crime attribute lives in a CSV file.

    Without a header row, column names are zero-based positions written as
    strings ("0", "1", ...).
    """

    lat_col: str = Field(default="Y", description="Latitude column (decimal degrees)")
    lon_col: str = Field(default="X", description="Longitude column (decimal degrees)")
    category_col: str = Field(default="Category", description="Crime type column")
    id_col: str | None = Field(default="IncidntNum", description="Record id column")
    date_col: str | None = Field(default="Date", description="Optional timestamp column")
    has_header: bool = True

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "example": {
                "lat_col": "Y",
                "lon_col": "X",
                "category_col": "Category",
                "id_col": "IncidntNum",
                "date_col": "Date",
                "has_header": True,
            }
        },
    }

    @model_validator(mode="after")
    def validate_columns(self) -> "ColumnMapping":
        """Latitude and longitude must come from different columns."""
        if self.lat_col == self.lon_col:
            raise ValueError(f"lat_col and lon_col must differ (both '{self.lat_col}')")
        return self

    @property
    def required_columns(self) -> list[str]:
        """Columns that must exist in the file, in a stable order."""
        cols = [self.lat_col, self.lon_col, self.category_col]
        cols.extend(c for c in (self.id_col, self.date_col) if c is not None)
        return cols


class BoundingBox(BaseModel):
    """Lat/lon rectangle in decimal degrees, edges inclusive."""

    south: float = Field(..., ge=-90, le=90)
    west: float = Field(..., ge=-180, le=180)
    north: float = Field(..., ge=-90, le=90)
    east: float = Field(..., ge=-180, le=180)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def validate_order(self) -> "BoundingBox":
        """South must not exceed north, west must not exceed east."""
        if self.south > self.north:
            raise ValueError(f"south ({self.south}) exceeds north ({self.north})")
        if self.west > self.east:
            raise ValueError(f"west ({self.west}) exceeds east ({self.east})")
        return self

    @classmethod
    def from_tuple(cls, box: tuple[float, float, float, float]) -> "BoundingBox":
        south, west, north, east = box
        return cls(south=south, west=west, north=north, east=east)

    def contains(self, lat: float, lon: float) -> bool:
        return self.south <= lat <= self.north and self.west <= lon <= self.east

    def mask(self, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
        """Vectorized contains()."""
        return (
            (lats >= self.south) & (lats <= self.north) & (lons >= self.west) & (lons <= self.east)
        )
