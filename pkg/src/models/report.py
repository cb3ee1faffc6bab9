"""Analysis report models."""

from pydantic import BaseModel, Field


class CommunityRow(BaseModel):
    """One community table row: crime average and community size."""

    community_id: int
    crime_avg: float
    size: int
    crime_total: int


class PresenceSummary(BaseModel):
    """Criminal versus safe nodes among a type's selected communities."""

    nodes: int
    criminal: int
    safe: int

    @property
    def criminal_pct(self) -> float:
        return 100.0 * self.criminal / self.nodes if self.nodes else 0.0


class TypeSummary(BaseModel):
    """Per crime type results."""

    crime_type: str
    crimes_mapped: int
    communities_detected: int
    modularity: float
    top_communities: list[CommunityRow] = Field(
        default_factory=list, description="Highest crime averages, at most 12"
    )
    selected: list[CommunityRow] = Field(
        default_factory=list, description="Communities kept by the top-k filter"
    )
    filter_warning: bool = False
    presence: PresenceSummary
    homogeneity: float | None = None
    completeness: float | None = None


class SimilarityEntry(BaseModel):
    """Similarity of two types' selected node sets, both variants."""

    type_a: str
    type_b: str
    normalized: float | None = None
    raw: float | None = Field(default=None, description="Unbounded form, distances in km")


class OverlayClassCount(BaseModel):
    overlay_class: str
    nodes: int
    types: int


class ConservationSummary(BaseModel):
    """Where every CSV row went."""

    rows_total: int = 0
    rows_rejected: dict[str, int] = Field(default_factory=dict)
    crimes_mapped: dict[str, int] = Field(default_factory=dict)
    crimes_unanalyzed: int = 0

    @property
    def balanced(self) -> bool:
        accounted = (
            sum(self.rows_rejected.values())
            + sum(self.crimes_mapped.values())
            + self.crimes_unanalyzed
        )
        return accounted == self.rows_total


class AnalysisReport(BaseModel):
    """Everything the analyze stage produces."""

    crime_types: list[str]
    similarity_variant: str = "normalized"
    graph_nodes: int = 0
    graph_edges: int = 0
    removed_component_nodes: int = 0
    topology_communities: int | None = None
    types: list[TypeSummary] = Field(default_factory=list)
    similarities: list[SimilarityEntry] = Field(default_factory=list)
    overlay_classes: list[OverlayClassCount] = Field(default_factory=list)
    crime_hubs: int = 0
    conservation: ConservationSummary | None = None

    def type_summary(self, crime_type: str) -> TypeSummary:
        for summary in self.types:
            if summary.crime_type == crime_type:
                return summary
        raise KeyError(crime_type)

    def similarity(self, type_a: str, type_b: str) -> SimilarityEntry:
        for entry in self.similarities:
            if {entry.type_a, entry.type_b} == {type_a, type_b}:
                return entry
        raise KeyError((type_a, type_b))
