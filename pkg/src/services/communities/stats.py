"""Per-community crime statistics and top-k filtering."""

from dataclasses import dataclass

import structlog

from src.services.communities.louvain import CommunitySet
from src.services.mapping import CrimeLayer
from src.utils.validators import LayerMismatchError

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class Community:
    """One community and its crime totals."""

    id: int
    node_ids: frozenset[int]
    crime_total: int

    def __post_init__(self) -> None:
        if not self.node_ids:
            raise ValueError(f"Community {self.id} has no node")

    @property
    def size(self) -> int:
        return len(self.node_ids)

    @property
    def crime_avg(self) -> float:
        return self.crime_total / self.size


@dataclass(frozen=True)
class TopCommunities:
    """Result of filter_top_communities."""

    communities: list[Community]
    k: int
    min_size: int
    warning: bool

    @property
    def node_ids(self) -> frozenset[int]:
        """Union of the selected communities' nodes."""
        return frozenset().union(*(c.node_ids for c in self.communities))


def community_stats(cs: CommunitySet, layer: CrimeLayer) -> list[Community]:
    """
    Size, crime total and average of every community.

    Sorted by crime average descending, then size descending, then id.

    Raises:
        LayerMismatchError: If the layer was built on another graph
    """
    if cs.graph_fingerprint and layer.graph_fingerprint and (
        cs.graph_fingerprint != layer.graph_fingerprint
    ):
        raise LayerMismatchError(
            f"Layer '{layer.crime_type}' (graph {layer.graph_fingerprint}) does not match "
            f"communities of graph {cs.graph_fingerprint}"
        )
    stats = [
        Community(cid, frozenset(nodes), sum(layer.count(n) for n in nodes))
        for cid, nodes in cs.members().items()
    ]
    stats.sort(key=lambda c: (-c.crime_avg, -c.size, c.id))
    return stats


def filter_top_communities(
    stats: list[Community], min_size: int = 100, k: int = 5
) -> TopCommunities:
    """First k communities with at least min_size nodes, in the given order.

    The warning flag is set when fewer than k communities qualify.
    """
    if k < 1 or min_size < 1:
        raise ValueError(f"k and min_size must be >= 1, got k={k}, min_size={min_size}")
    selected = [c for c in stats if c.size >= min_size][:k]
    warning = len(selected) < k
    if warning:
        logger.warning(
            "too_few_qualifying_communities",
            requested=k,
            qualifying=len(selected),
            min_size=min_size,
        )
    return TopCommunities(selected, k=k, min_size=min_size, warning=warning)
