"""Distance-to-affinity transform and the weighted graph used for detection."""

from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import networkx as nx
import structlog

from src.services.graph import StreetGraph, undirected_projection

logger = structlog.get_logger(__name__)

# Distances below this floor (meters) get the affinity of the floor
AFFINITY_EPSILON_M = 1.0
AFFINITY_TRANSFORM = "inverse_distance_eps_1m"


@dataclass(frozen=True)
class AffinityGraph:
    """Undirected graph with positive affinities.

    `self_loops` maps a node to the weight w of its loop; a loop contributes
    2w to the node's degree. `node_sizes` carries crime counts; fold_node_sizes
    turns them into loops.
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int, float], ...]
    node_sizes: Mapping[int, float] = field(default_factory=dict)
    self_loops: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        known = set(self.nodes)
        for u, v, a in self.edges:
            if u not in known or v not in known:
                raise ValueError(f"Affinity edge {u}-{v} references an unknown node")
            if u == v:
                raise ValueError(f"Self-loop {u}-{u} must be given through self_loops")
            if not (a > 0 and a != float("inf")):
                raise ValueError(f"Affinity of {u}-{v} must be finite and positive, got {a}")
        for n, w in self.self_loops.items():
            if n not in known or w < 0:
                raise ValueError(f"Invalid self-loop {w} on node {n}")
        for n, s in self.node_sizes.items():
            if n not in known or s < 0:
                raise ValueError(f"Invalid size {s} on node {n}")

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def total_weight(self) -> float:
        """m: sum of edge affinities plus loop weights."""
        return sum(a for _, _, a in self.edges) + sum(self.self_loops.values())

    @property
    def mean_affinity(self) -> float:
        if not self.edges:
            return 0.0
        return sum(a for _, _, a in self.edges) / len(self.edges)

    def degrees(self) -> dict[int, float]:
        """k_i including 2w for a loop of weight w."""
        k = dict.fromkeys(self.nodes, 0.0)
        for u, v, a in self.edges:
            k[u] += a
            k[v] += a
        for n, w in self.self_loops.items():
            k[n] += 2 * w
        return k

    def with_self_loops(self, loops: Mapping[int, float]) -> "AffinityGraph":
        return AffinityGraph(
            self.nodes,
            self.edges,
            self.node_sizes,
            {n: w for n, w in sorted(loops.items()) if w > 0},
        )

    def with_node_sizes(self, sizes: Mapping[int, float]) -> "AffinityGraph":
        return replace(self, node_sizes={n: float(s) for n, s in sorted(sizes.items()) if s > 0})

    def fold_node_sizes(self, scale: float) -> "AffinityGraph":
        """Loops of weight scale * size on every sized node."""
        return self.with_self_loops({n: scale * s for n, s in self.node_sizes.items()})

    def to_networkx(self) -> nx.Graph:
        """Undirected graph with `weight` on edges and loops and `crimes` on nodes."""
        g = nx.Graph()
        g.add_nodes_from((n, {"crimes": self.node_sizes.get(n, 0.0)}) for n in self.nodes)
        g.add_weighted_edges_from(self.edges)
        g.add_weighted_edges_from((n, n, w) for n, w in self.self_loops.items())
        return g


def distance_to_affinity(
    g: StreetGraph,
    epsilon: float = AFFINITY_EPSILON_M,
) -> AffinityGraph:
    """Map every edge length d to 1 / max(d, epsilon); directed graphs are projected first."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if g.directed:
        g = undirected_projection(g)
    edges = tuple((e.src, e.dst, 1.0 / max(e.weight, epsilon)) for e in g.edges if e.src != e.dst)
    ag = AffinityGraph(nodes=tuple(g.nodes), edges=edges)
    logger.debug("affinity_graph_built", nodes=len(ag), edges=len(edges), epsilon_m=epsilon)
    return ag
