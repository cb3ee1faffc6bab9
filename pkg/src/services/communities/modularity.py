"""Weighted modularity."""

from collections.abc import Mapping

import networkx as nx

from src.services.communities.affinity import AffinityGraph
from src.utils.validators import ModularityError


def modularity(ag: AffinityGraph, partition: Mapping[int, int]) -> float:
    """
    Q = sum over communities of in_c / 2m - (tot_c / 2m)^2 on the affinity graph.

    A loop of weight w adds w to m and 2w to its node's degree.

    Raises:
        ModularityError: If the graph carries no weight
        ValueError: If the partition does not cover every node
    """
    missing = [n for n in ag.nodes if n not in partition]
    if missing:
        raise ValueError(f"Partition misses {len(missing)} node(s), e.g. {missing[:5]}")
    if ag.total_weight <= 0:
        raise ModularityError("Modularity is undefined for a graph without edge weight")

    members: dict[int, set[int]] = {}
    for n in ag.nodes:
        members.setdefault(partition[n], set()).add(n)
    return nx.community.modularity(ag.to_networkx(), members.values(), weight="weight")
