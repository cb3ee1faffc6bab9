"""Pipeline configuration models."""

from enum import Enum
from pathlib import Path

from pydantic import BaseModel, Field, model_validator

from src.config import Settings
from src.models.ingest import BoundingBox, ColumnMapping


class NodeWeightMode(str, Enum):
    """How node crime counts enter community detection."""

    IGNORE = "ignore"
    SELF_LOOP = "self_loop"


class SimilarityVariant(str, Enum):
    """Which similarity formula drives pairwise comparisons."""

    NORMALIZED = "normalized"
    RAW = "raw"


class GraphFormat(str, Enum):
    """Street map source formats."""

    AUTO = "auto"
    OSM = "osm"
    INTERCHANGE = "interchange"

    def resolve(self, path: Path) -> "GraphFormat":
        """Pick a concrete format for `path` when set to AUTO."""
        if self is not GraphFormat.AUTO:
            return self
        if path.suffix.lower() in {".osm", ".xml"}:
            return GraphFormat.OSM
        return GraphFormat.INTERCHANGE


class DetectionConfig(BaseModel):
    """Parameters of one community-detection run."""

    seed: int = 42
    node_weight_mode: NodeWeightMode = NodeWeightMode.SELF_LOOP
    self_loop_scale: float | None = Field(
        default=None,
        description="Affinity per mapped crime; None means the mean edge affinity",
        gt=0,
    )
    tolerance: float = Field(default=1e-7, ge=0)
    check_monotone: bool = Field(
        default=False,
        description="Raise if modularity decreases across a pass or level",
    )

    model_config = {"frozen": True}


class FilterConfig(BaseModel):
    """Top-k selection of highly criminal communities."""

    min_size: int = Field(default=100, ge=1)
    k: int = Field(default=5, ge=1)

    model_config = {"frozen": True}


class PipelineConfig(BaseModel):
    """Everything run_pipeline needs."""

    graph_path: Path
    graph_format: GraphFormat = GraphFormat.AUTO
    crimes_path: Path
    columns: ColumnMapping = Field(default_factory=ColumnMapping)
    crime_types: list[str] = Field(..., min_length=1)
    bbox: BoundingBox | None = None
    highway_classes: frozenset[str]
    detection: DetectionConfig = Field(default_factory=DetectionConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    similarity_variant: SimilarityVariant = SimilarityVariant.NORMALIZED
    out_dir: Path
    workers: int = Field(default=4, ge=1)
    grid_cell_m: float = Field(default=250.0, gt=0)
    topology_baseline: bool = True
    geojson_include_none: bool = False
    community_filter_tsv: bool = False

    @model_validator(mode="after")
    def validate_types(self) -> "PipelineConfig":
        """Crime types must be non-empty and unique."""
        if any(not t for t in self.crime_types):
            raise ValueError("Crime types must be non-empty strings")
        if len(set(self.crime_types)) != len(self.crime_types):
            raise ValueError(f"Duplicate crime types in {self.crime_types}")
        return self

    @classmethod
    def from_settings(cls, s: Settings) -> "PipelineConfig":
        """Build a pipeline configuration from loaded settings."""
        box = s.bbox_box
        return cls(
            graph_path=Path(s.graph_path) if s.graph_path else Path(),
            graph_format=GraphFormat(s.graph_format),
            crimes_path=Path(s.crimes_path) if s.crimes_path else Path(),
            columns=ColumnMapping(
                lat_col=s.lat_col,
                lon_col=s.lon_col,
                category_col=s.category_col,
                id_col=s.id_col or None,
                date_col=s.date_col or None,
                has_header=s.csv_has_header,
            ),
            crime_types=s.crime_types_list,
            bbox=BoundingBox.from_tuple(box) if box else None,
            highway_classes=s.highway_classes_set,
            detection=DetectionConfig(
                seed=s.seed,
                node_weight_mode=NodeWeightMode(s.node_weight_mode),
                self_loop_scale=s.self_loop_scale,
                tolerance=s.tolerance,
                check_monotone=s.check_monotone,
            ),
            filter=FilterConfig(min_size=s.min_size, k=s.top_k),
            similarity_variant=SimilarityVariant(s.similarity_variant),
            out_dir=Path(s.out_dir),
            workers=s.workers,
            grid_cell_m=s.grid_cell_m,
            topology_baseline=s.topology_baseline,
            geojson_include_none=s.geojson_include_none,
            community_filter_tsv=s.community_filter_tsv,
        )
