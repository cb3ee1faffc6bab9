"""GeoJSON (RFC 7946) output models."""

from typing import Any, Literal

from pydantic import BaseModel, Field, field_validator


class PointGeometry(BaseModel):
    """A GeoJSON Point; coordinates are [longitude, latitude]."""

    type: Literal["Point"] = "Point"
    coordinates: tuple[float, float]

    @field_validator("coordinates")
    @classmethod
    def validate_position(cls, v: tuple[float, float]) -> tuple[float, float]:
        """Longitude first, both within WGS 84 ranges."""
        lon, lat = v
        if not -180 <= lon <= 180 or not -90 <= lat <= 90:
            raise ValueError(f"Position {v} is not a valid [lon, lat] pair")
        return v


class Feature(BaseModel):
    """A GeoJSON Feature carrying one graph node."""

    type: Literal["Feature"] = "Feature"
    geometry: PointGeometry
    properties: dict[str, Any] = Field(default_factory=dict)


class FeatureCollection(BaseModel):
    """Top-level GeoJSON document."""

    type: Literal["FeatureCollection"] = "FeatureCollection"
    features: list[Feature] = Field(default_factory=list)

    model_config = {
        "json_schema_extra": {
            "example": {
                "type": "FeatureCollection",
                "features": [
                    {
                        "type": "Feature",
                        "geometry": {"type": "Point", "coordinates": [-122.4194, 37.7749]},
                        "properties": {
                            "node_id": 65307344,
                            "overlay_class": "ASSAULT+LARCENY/THEFT",
                            "crime_counts": {"ASSAULT": 12, "LARCENY/THEFT": 40},
                            "communities": {"ASSAULT": 3, "LARCENY/THEFT": 7},
                        },
                    }
                ],
            }
        }
    }
