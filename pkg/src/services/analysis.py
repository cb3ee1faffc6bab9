"""Spatial similarity, homogeneity/completeness scores and overlay classes."""

import math
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from itertools import chain, combinations

import numpy as np
import structlog

from src.models.pipeline import SimilarityVariant
from src.models.report import (
    AnalysisReport,
    CommunityRow,
    ConservationSummary,
    OverlayClassCount,
    PresenceSummary,
    SimilarityEntry,
    TypeSummary,
)
from src.services.communities.louvain import CommunitySet
from src.services.communities.stats import Community, TopCommunities
from src.services.geo import DEFAULT_EARTH, EarthModel, GeoPoint, pairwise_distances
from src.services.graph import StreetGraph
from src.services.mapping import CrimeLayer

logger = structlog.get_logger(__name__)

NONE_CLASS = "none"
# Rows shown per type in the community table
TABLE_ROWS = 12
# Rows per distance block; one block holds _BLOCK_ROWS * len(other set) floats
_BLOCK_ROWS = 1024


@dataclass(frozen=True)
class NodeSet:
    """Positions of the nodes of a type's selected communities."""

    points: tuple[tuple[int, GeoPoint], ...]

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_nodes(cls, g: StreetGraph, node_ids: Iterable[int]) -> "NodeSet":
        return cls(tuple((n, g.nodes[n]) for n in sorted(set(node_ids))))

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        lats = np.fromiter((p.lat for _, p in self.points), dtype=np.float64, count=len(self))
        lons = np.fromiter((p.lon for _, p in self.points), dtype=np.float64, count=len(self))
        return lats, lons


def _distance_blocks(
    a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray], earth: EarthModel
) -> Iterator[np.ndarray]:
    (a_lat, a_lon), (b_lat, b_lon) = a, b
    for start in range(0, len(a_lat), _BLOCK_ROWS):
        stop = start + _BLOCK_ROWS
        yield pairwise_distances(a_lat[start:stop], a_lon[start:stop], b_lat, b_lon, earth)


def _pair_sum(e: NodeSet, f: NodeSet, earth: EarthModel) -> float:
    # fsum is exact, so the sum does not depend on argument order or blocking
    blocks = _distance_blocks(e.coordinates(), f.coordinates(), earth)
    return math.fsum(chain.from_iterable(block.ravel().tolist() for block in blocks))


def _diameter(e: NodeSet, f: NodeSet, earth: EarthModel) -> float:
    union = NodeSet(tuple(sorted(set(e.points) | set(f.points), key=lambda item: item[0])))
    lats, lons = union.coordinates()
    diameter = 0.0
    # rows [start, stop) against columns [start, n) cover every unordered pair
    for start in range(0, len(lats), _BLOCK_ROWS):
        stop = start + _BLOCK_ROWS
        block = pairwise_distances(
            lats[start:stop], lons[start:stop], lats[start:], lons[start:], earth
        )
        diameter = max(diameter, float(block.max()))
    return diameter


def _check_sets(e: NodeSet, f: NodeSet) -> None:
    if not e.points or not f.points:
        raise ValueError("Similarity needs two non-empty node sets")


def _same_positions(e: NodeSet, f: NodeSet) -> bool:
    return {p for _, p in e.points} == {p for _, p in f.points}


def _raw_from_sum(total: float, e: NodeSet, f: NodeSet) -> float:
    return 1.0 - (total / 1000.0) / (len(e) + len(f))


def _normalized_from_sum(total: float, e: NodeSet, f: NodeSet, earth: EarthModel) -> float:
    if _same_positions(e, f):
        return 1.0
    diameter = _diameter(e, f, earth)
    if diameter == 0.0:
        return 1.0
    mean = total / (len(e) * len(f))
    return min(1.0, max(0.0, 1.0 - mean / diameter))


def similarity_raw(e: NodeSet, f: NodeSet, earth: EarthModel = DEFAULT_EARTH) -> float:
    """1 - (sum of all cross distances in km) / (|E| + |F|); not bounded to [0, 1]."""
    _check_sets(e, f)
    return _raw_from_sum(_pair_sum(e, f, earth), e, f)


def similarity_normalized(e: NodeSet, f: NodeSet, earth: EarthModel = DEFAULT_EARTH) -> float:
    """
    1 - mean cross distance / D, where D is the largest distance within E ∪ F.

    Returns 1.0 when every point coincides or when both sets hold the same
    positions. The result lies in [0, 1].
    """
    _check_sets(e, f)
    if _same_positions(e, f):
        return 1.0
    return _normalized_from_sum(_pair_sum(e, f, earth), e, f, earth)


def similarity_scores(
    e: NodeSet, f: NodeSet, earth: EarthModel = DEFAULT_EARTH
) -> tuple[float, float]:
    """(normalized, raw) from one pass over the cross distances."""
    _check_sets(e, f)
    total = _pair_sum(e, f, earth)
    return _normalized_from_sum(total, e, f, earth), _raw_from_sum(total, e, f)



@dataclass(frozen=True)
class PresenceLabeling:
    """Contingency table of communities against crime presence.

    `table` maps a community id to (criminal nodes, safe nodes).
    """

    table: Mapping[int, tuple[int, int]]

    def __post_init__(self) -> None:
        if any(c < 0 or s < 0 for c, s in self.table.values()):
            raise ValueError("Presence counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(c + s for c, s in self.table.values())

    @property
    def class_totals(self) -> tuple[int, int]:
        """(criminal, safe) node totals."""
        return (
            sum(c for c, _ in self.table.values()),
            sum(s for _, s in self.table.values()),
        )

    @property
    def community_totals(self) -> dict[int, int]:
        return {cid: c + s for cid, (c, s) in self.table.items()}


def build_presence_labeling(
    communities: Sequence[Community] | TopCommunities, layer: CrimeLayer
) -> PresenceLabeling:
    """Label every node criminal (count > 0) or safe and tabulate per community."""
    if isinstance(communities, TopCommunities):
        communities = communities.communities
    table: dict[int, tuple[int, int]] = {}
    for community in communities:
        criminal = sum(1 for n in community.node_ids if layer.count(n) > 0)
        table[community.id] = (criminal, community.size - criminal)
    return PresenceLabeling(table)


def _entropy(counts: Iterable[int], total: int) -> float:
    return -sum((n / total) * math.log2(n / total) for n in counts if n > 0)


def _conditional_entropy(cells: Iterable[tuple[int, int]], total: int) -> float:
    """H(X|Y) from (joint count, count of the conditioning value) pairs."""
    return -sum((n / total) * math.log2(n / given) for n, given in cells if n > 0)


def _clip(score: float) -> float:
    return min(1.0, max(0.0, score))


def homogeneity_score(pl: PresenceLabeling) -> float:
    """1 - H(class | community) / H(class); 1 when every node has the same class."""
    total = pl.total
    if total == 0:
        raise ValueError("Homogeneity is undefined for an empty labeling")
    h_class = _entropy(pl.class_totals, total)
    if h_class == 0.0:
        return 1.0
    sizes = pl.community_totals
    cells = [(n, sizes[cid]) for cid, row in pl.table.items() for n in row]
    return _clip(1.0 - _conditional_entropy(cells, total) / h_class)


def completeness_score(pl: PresenceLabeling) -> float:
    """1 - H(community | class) / H(community); 1 for a single community."""
    total = pl.total
    if total == 0:
        raise ValueError("Completeness is undefined for an empty labeling")
    h_comm = _entropy(pl.community_totals.values(), total)
    if h_comm == 0.0:
        return 1.0
    class_totals = pl.class_totals
    cells = [(row[j], class_totals[j]) for row in pl.table.values() for j in (0, 1)]
    return _clip(1.0 - _conditional_entropy(cells, total) / h_comm)


def overlay_membership(sets: Mapping[str, Iterable[int]]) -> dict[int, tuple[str, ...]]:
    """
    Crime types whose selected node union contains each node.

    Only nodes in at least one set are returned; their class lists types in the
    mapping's order. Every other node is in the "none" class.
    """
    overlay: dict[int, list[str]] = {}
    for crime_type, node_ids in sets.items():
        for n in set(node_ids):
            overlay.setdefault(n, []).append(crime_type)
    return {n: tuple(overlay[n]) for n in sorted(overlay)}


def overlay_label(overlay_class: Sequence[str]) -> str:
    return "+".join(overlay_class) if overlay_class else NONE_CLASS


def overlay_class_counts(overlay: Mapping[int, Sequence[str]]) -> list[OverlayClassCount]:
    """Node count per non-empty class, multi-type classes first."""
    counts = Counter(tuple(cls) for cls in overlay.values())
    return [
        OverlayClassCount(overlay_class=overlay_label(cls), nodes=n, types=len(cls))
        for cls, n in sorted(counts.items(), key=lambda item: (-len(item[0]), item[0]))
    ]


def _rows(communities: Iterable[Community]) -> list[CommunityRow]:
    return [
        CommunityRow(
            community_id=c.id, crime_avg=c.crime_avg, size=c.size, crime_total=c.crime_total
        )
        for c in communities
    ]


def _pair_similarity(
    type_a: str, type_b: str, a: NodeSet, b: NodeSet, earth: EarthModel
) -> SimilarityEntry:
    entry = SimilarityEntry(type_a=type_a, type_b=type_b)
    if a.points and b.points:
        entry.normalized, entry.raw = similarity_scores(a, b, earth)
    else:
        logger.warning("similarity_skipped_empty_set", type_a=type_a, type_b=type_b)
    return entry


def analyze(
    g: StreetGraph,
    layers: Mapping[str, CrimeLayer],
    community_sets: Mapping[str, CommunitySet],
    stats: Mapping[str, list[Community]],
    selections: Mapping[str, TopCommunities],
    variant: SimilarityVariant = SimilarityVariant.NORMALIZED,
    earth: EarthModel = DEFAULT_EARTH,
) -> tuple[AnalysisReport, dict[int, tuple[str, ...]]]:
    """
    Assemble the report for the analyzed crime types, in mapping order.

    Returns the report and the overlay class of every selected node.
    """
    crime_types = list(selections)
    node_sets = {t: NodeSet.from_nodes(g, selections[t].node_ids) for t in crime_types}
    report = AnalysisReport(
        crime_types=crime_types,
        similarity_variant=variant.value,
        graph_nodes=len(g),
        graph_edges=len(g.edges),
    )

    for t in crime_types:
        top = selections[t]
        labeling = build_presence_labeling(top, layers[t])
        criminal, safe = labeling.class_totals
        summary = TypeSummary(
            crime_type=t,
            crimes_mapped=layers[t].total_mapped,
            communities_detected=len(community_sets[t]),
            modularity=community_sets[t].modularity,
            top_communities=_rows(stats[t][:TABLE_ROWS]),
            selected=_rows(top.communities),
            filter_warning=top.warning,
            presence=PresenceSummary(nodes=labeling.total, criminal=criminal, safe=safe),
        )
        if labeling.total:
            summary.homogeneity = homogeneity_score(labeling)
            summary.completeness = completeness_score(labeling)
        report.types.append(summary)
        logger.info(
            "type_analyzed",
            crime_type=t,
            selected_nodes=labeling.total,
            criminal_nodes=criminal,
            homogeneity=summary.homogeneity,
            completeness=summary.completeness,
        )

    for type_a, type_b in combinations(crime_types, 2):
        report.similarities.append(
            _pair_similarity(type_a, type_b, node_sets[type_a], node_sets[type_b], earth)
        )

    overlay = overlay_membership({t: selections[t].node_ids for t in crime_types})
    report.overlay_classes = overlay_class_counts(overlay)
    report.crime_hubs = sum(1 for cls in overlay.values() if len(cls) >= 2)
    logger.info(
        "analysis_completed",
        types=len(crime_types),
        pairs=len(report.similarities),
        crime_hubs=report.crime_hubs,
    )
    return report, overlay


def conservation_summary(
    rows_total: int,
    rows_rejected: Mapping[str, int],
    layers: Mapping[str, CrimeLayer],
    accepted: int,
) -> ConservationSummary:
    """Account for every CSV row: rejected, mapped under an analyzed type, or unanalyzed."""
    mapped = {t: layer.total_mapped for t, layer in layers.items()}
    return ConservationSummary(
        rows_total=rows_total,
        rows_rejected=dict(rows_rejected),
        crimes_mapped=mapped,
        crimes_unanalyzed=accepted - sum(mapped.values()),
    )
