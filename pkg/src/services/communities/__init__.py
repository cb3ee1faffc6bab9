"""Community detection, statistics and filtering."""

from src.services.communities.affinity import AffinityGraph, distance_to_affinity
from src.services.communities.louvain import CommunitySet, detect_communities
from src.services.communities.modularity import modularity
from src.services.communities.stats import (
    Community,
    TopCommunities,
    community_stats,
    filter_top_communities,
)
from src.services.communities.storage import load_communities, save_communities

__all__ = [
    "AffinityGraph",
    "Community",
    "CommunitySet",
    "TopCommunities",
    "community_stats",
    "detect_communities",
    "distance_to_affinity",
    "filter_top_communities",
    "load_communities",
    "modularity",
    "save_communities",
]
