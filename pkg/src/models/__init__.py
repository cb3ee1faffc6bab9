"""Pydantic models for configuration and serialized outputs."""

from src.models.geojson import Feature, FeatureCollection, PointGeometry
from src.models.ingest import BoundingBox, ColumnMapping
from src.models.pipeline import (
    DetectionConfig,
    FilterConfig,
    GraphFormat,
    NodeWeightMode,
    PipelineConfig,
    SimilarityVariant,
)

__all__ = [
    "BoundingBox",
    "ColumnMapping",
    "DetectionConfig",
    "Feature",
    "FeatureCollection",
    "FilterConfig",
    "GraphFormat",
    "NodeWeightMode",
    "PipelineConfig",
    "PointGeometry",
    "SimilarityVariant",
]
