"""Street-network model and its transformations."""

import hashlib
import itertools
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import structlog

from src.services.geo import DEFAULT_EARTH, EarthModel, GeoPoint, great_circle_distance
from src.services.ingest.osm import RawMapExtract
from src.utils.validators import EmptyGraphError, validate_weight

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, slots=True, order=True)
class Edge:
    """A street segment; for undirected graphs src < dst."""

    src: int
    dst: int
    weight: float


class StreetGraph:
    """Georeferenced street graph with edge weights in meters.

    Nodes are kept sorted by id and edges sorted by (src, dst), so two graphs
    with the same content compare equal and serialize identically.
    """

    def __init__(
        self,
        nodes: Mapping[int, GeoPoint],
        edges: Iterable[Edge] = (),
        directed: bool = True,
    ):
        self._nodes = {node_id: nodes[node_id] for node_id in sorted(nodes)}
        self._directed = directed
        canonical: dict[tuple[int, int], Edge] = {}
        for edge in edges:
            if edge.src not in self._nodes or edge.dst not in self._nodes:
                raise ValueError(f"Edge {edge.src}->{edge.dst} references an unknown node")
            validate_weight(edge.weight)
            if not directed and edge.src > edge.dst:
                edge = Edge(edge.dst, edge.src, edge.weight)
            key = (edge.src, edge.dst)
            if key in canonical:
                raise ValueError(f"Duplicate edge {edge.src}->{edge.dst}")
            canonical[key] = edge
        self._edges = tuple(canonical[key] for key in sorted(canonical))

    @property
    def nodes(self) -> Mapping[int, GeoPoint]:
        return self._nodes

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def directed(self) -> bool:
        return self._directed

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StreetGraph):
            return NotImplemented
        return (
            self._directed == other._directed
            and self._nodes == other._nodes
            and self._edges == other._edges
        )

    def __hash__(self) -> int:
        return hash(self.fingerprint)

    def __repr__(self) -> str:
        kind = "directed" if self._directed else "undirected"
        return f"StreetGraph({kind}, nodes={len(self._nodes)}, edges={len(self._edges)})"

    def canonical_lines(self) -> Iterator[str]:
        """Node and edge records in interchange syntax, without line endings."""
        for node_id, p in self._nodes.items():
            yield f"N\t{node_id}\t{p.lat!r}\t{p.lon!r}"
        for e in self._edges:
            yield f"E\t{e.src}\t{e.dst}\t{e.weight!r}"

    @cached_property
    def fingerprint(self) -> str:
        """Short content hash tying layers and community files to this graph."""
        digest = hashlib.sha256()
        digest.update(b"directed\n" if self._directed else b"undirected\n")
        for line in self.canonical_lines():
            digest.update(line.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()[:16]

    def to_networkx(self) -> nx.Graph:
        """Weighted networkx view (DiGraph when directed)."""
        nxg: nx.Graph = nx.DiGraph() if self._directed else nx.Graph()
        nxg.add_nodes_from(self._nodes)
        nxg.add_weighted_edges_from((e.src, e.dst, e.weight) for e in self._edges)
        return nxg

    def subgraph(self, node_ids: Iterable[int]) -> "StreetGraph":
        """Induced subgraph on node_ids."""
        keep = set(node_ids)
        return StreetGraph(
            {n: self._nodes[n] for n in keep},
            (e for e in self._edges if e.src in keep and e.dst in keep),
            directed=self._directed,
        )


def build_street_graph(extract: RawMapExtract, earth: EarthModel = DEFAULT_EARTH) -> StreetGraph:
    """
    Build the directed street graph of an extract.

    Every consecutive node pair of a way becomes a segment weighted by its
    great-circle length. Two-way streets yield both directions. When two ways
    share a segment the shorter weight is kept.

    Raises:
        EmptyGraphError: If the extract holds no way
    """
    if not extract.ways:
        raise EmptyGraphError("Cannot build a street graph from an extract without ways")

    weights: dict[tuple[int, int], float] = {}
    used: set[int] = set()
    for way in extract.ways:
        for a, b in itertools.pairwise(way.node_ids):
            if a == b:
                continue
            used.update((a, b))
            w = great_circle_distance(extract.nodes[a], extract.nodes[b], earth)
            pairs = [(a, b)] if way.oneway else [(a, b), (b, a)]
            for key in pairs:
                if key not in weights or w < weights[key]:
                    weights[key] = w

    if not used:
        raise EmptyGraphError("Extract ways contain no segment between distinct nodes")

    g = StreetGraph(
        {n: extract.nodes[n] for n in used},
        (Edge(src, dst, w) for (src, dst), w in weights.items()),
        directed=True,
    )
    logger.info("graph_built", nodes=len(g), edges=len(g.edges), ways=len(extract.ways))
    return g


def undirected_projection(g: StreetGraph) -> StreetGraph:
    """One undirected edge per endpoint pair, keeping the minimum weight; self-loops dropped."""
    weights: dict[tuple[int, int], float] = {}
    for e in g.edges:
        if e.src == e.dst:
            continue
        key = (e.src, e.dst) if e.src < e.dst else (e.dst, e.src)
        if key not in weights or e.weight < weights[key]:
            weights[key] = e.weight
    projected = StreetGraph(
        g.nodes, (Edge(u, v, w) for (u, v), w in weights.items()), directed=False
    )
    logger.debug(
        "graph_projected",
        nodes=len(projected),
        edges=len(projected.edges),
        source_edges=len(g.edges),
    )
    return projected


def connected_components(g: StreetGraph) -> list[set[int]]:
    """Components ordered by size descending, then by smallest node id."""
    nxg = g.to_networkx()
    if g.directed:
        comps = [set(c) for c in nx.weakly_connected_components(nxg)]
    else:
        comps = [set(c) for c in nx.connected_components(nxg)]
    return sorted(comps, key=lambda c: (-len(c), min(c)))


def is_connected(g: StreetGraph) -> bool:
    return len(g) > 0 and len(connected_components(g)) == 1


def largest_component(g: StreetGraph) -> StreetGraph:
    """
    Induced subgraph on the largest connected component.

    Ties go to the component holding the smallest node id.

    Raises:
        EmptyGraphError: If the graph has no node
    """
    if len(g) == 0:
        raise EmptyGraphError("Cannot take the largest component of an empty graph")
    comps = connected_components(g)
    if len(comps) == 1:
        return g
    largest = comps[0]
    logger.info(
        "largest_component_selected",
        nodes=len(largest),
        removed_nodes=len(g) - len(largest),
        components=len(comps),
    )
    return g.subgraph(largest)
