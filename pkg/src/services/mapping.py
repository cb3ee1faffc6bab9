"""Crime mapping: assign each crime to its nearest street node."""

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from src.services.geo import SpatialIndex, build_spatial_index
from src.services.graph import StreetGraph
from src.services.ingest.crimes import CrimeRecord
from src.services.ingest.interchange import (
    check_count,
    parse_float,
    parse_int,
    read_artifact,
    write_artifact,
)
from src.utils.validators import (
    EmptyGraphError,
    InterchangeFormatError,
    LayerMismatchError,
)

logger = structlog.get_logger(__name__)

LAYER_MAGIC = "crimegraph-layer-v1"

# Crimes per worker task
_CHUNK_SIZE = 8192


@dataclass(frozen=True)
class CrimeLayer:
    """Per-node crime counts of one crime type over one graph.

    Only nodes with at least one crime are stored; count() returns 0 for the rest.
    """

    crime_type: str
    counts: Mapping[int, int]
    total_mapped: int
    graph_fingerprint: str
    max_distance_m: float = 0.0
    mean_distance_m: float = 0.0

    def __post_init__(self) -> None:
        if any(c <= 0 for c in self.counts.values()):
            raise ValueError(f"Layer '{self.crime_type}' stores a non-positive count")
        total = sum(self.counts.values())
        if total != self.total_mapped:
            raise ValueError(
                f"Layer '{self.crime_type}' counts sum to {total}, "
                f"total_mapped is {self.total_mapped}"
            )

    def count(self, node_id: int) -> int:
        return self.counts.get(node_id, 0)

    @property
    def criminal_nodes(self) -> set[int]:
        return set(self.counts)

    def check_graph(self, g: StreetGraph) -> None:
        """
        Ensure the layer was built on `g`.

        A layer without a fingerprint only needs its keyed nodes to exist in `g`.

        Raises:
            LayerMismatchError: If the fingerprints differ or a keyed node is missing from `g`
        """
        if self.graph_fingerprint and self.graph_fingerprint != g.fingerprint:
            raise LayerMismatchError(
                f"Layer '{self.crime_type}' was built on graph {self.graph_fingerprint}, "
                f"not {g.fingerprint}"
            )
        missing = [n for n in self.counts if n not in g]
        if missing:
            raise LayerMismatchError(
                f"Layer '{self.crime_type}' references {len(missing)} node(s) absent from the "
                f"graph, e.g. {sorted(missing)[:5]}"
            )


def empty_layer(g: StreetGraph, crime_type: str) -> CrimeLayer:
    return CrimeLayer(crime_type, {}, 0, g.fingerprint)


def _weighted_mean_distance(layers: Sequence[CrimeLayer]) -> float:
    total = sum(layer.total_mapped for layer in layers)
    if total == 0:
        return 0.0
    return math.fsum(layer.mean_distance_m * layer.total_mapped for layer in layers) / total


def combine_layers(layers: Sequence[CrimeLayer], crime_type: str) -> CrimeLayer:
    """Sum of several layers over the same graph.

    mean_distance_m is the mean of the inputs weighted by their mapped counts.
    """
    fingerprints = {layer.graph_fingerprint for layer in layers}
    if len(fingerprints) > 1:
        raise LayerMismatchError(f"Cannot combine layers built on different graphs: {fingerprints}")
    totals: dict[int, int] = {}
    for layer in layers:
        for node_id, c in layer.counts.items():
            totals[node_id] = totals.get(node_id, 0) + c
    return CrimeLayer(
        crime_type=crime_type,
        counts=dict(sorted(totals.items())),
        total_mapped=sum(layer.total_mapped for layer in layers),
        graph_fingerprint=fingerprints.pop() if fingerprints else "",
        max_distance_m=max((layer.max_distance_m for layer in layers), default=0.0),
        mean_distance_m=_weighted_mean_distance(layers),
    )


def map_crimes(
    g: StreetGraph,
    crimes: Iterable[CrimeRecord],
    crime_type: str,
    index: SpatialIndex | None = None,
    workers: int = 1,
    cell_m: float = 250.0,
) -> CrimeLayer:
    """
    Count the crimes of `crime_type` at their nearest graph node.

    Crimes of other categories are ignored. The crime list is split into
    chunks queried on a thread pool; counts are merged by integer addition so
    the layer does not depend on input order or worker count.

    Raises:
        EmptyGraphError: If the graph has no node
    """
    if len(g) == 0:
        raise EmptyGraphError("Cannot map crimes onto an empty graph")
    if index is None:
        index = build_spatial_index(list(g.nodes.items()), cell_m=cell_m)

    matching = [c for c in crimes if c.category == crime_type]
    if not matching:
        logger.info("crimes_mapped", crime_type=crime_type, mapped=0)
        return empty_layer(g, crime_type)

    lats = np.fromiter((c.point.lat for c in matching), dtype=np.float64, count=len(matching))
    lons = np.fromiter((c.point.lon for c in matching), dtype=np.float64, count=len(matching))
    bounds = list(range(0, len(matching), _CHUNK_SIZE)) + [len(matching)]
    slices = list(itertools.pairwise(bounds))

    def query(span: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        start, stop = span
        return index.query_many(lats[start:stop], lons[start:stop])

    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(query, slices))
    else:
        results = [query(span) for span in slices]

    node_ids = np.concatenate([ids for ids, _ in results])
    dists = np.concatenate([d for _, d in results])
    values, counts = np.unique(node_ids, return_counts=True)

    layer = CrimeLayer(
        crime_type=crime_type,
        counts={int(n): int(c) for n, c in zip(values, counts, strict=True)},
        total_mapped=len(matching),
        graph_fingerprint=g.fingerprint,
        max_distance_m=float(dists.max()),
        # fsum is exact, so the mean does not depend on chunking
        mean_distance_m=math.fsum(dists.tolist()) / len(dists),
    )
    logger.info(
        "crimes_mapped",
        crime_type=crime_type,
        mapped=layer.total_mapped,
        nodes_with_crime=len(layer.counts),
        max_distance_m=round(layer.max_distance_m, 3),
        mean_distance_m=round(layer.mean_distance_m, 3),
    )
    return layer


def save_layer(layer: CrimeLayer, path: str | Path) -> None:
    """Write a crimegraph-layer-v1 file; zero-count nodes are omitted."""
    if "\t" in layer.crime_type or "\n" in layer.crime_type:
        raise ValueError(f"Crime type {layer.crime_type!r} contains a tab or newline")
    metadata = [
        ("total_mapped", layer.total_mapped),
        ("nodes", len(layer.counts)),
        ("max_distance_m", repr(layer.max_distance_m)),
        ("mean_distance_m", repr(layer.mean_distance_m)),
    ]
    lines = (f"{node_id}\t{c}" for node_id, c in sorted(layer.counts.items()))
    write_artifact(path, [LAYER_MAGIC, layer.crime_type, layer.graph_fingerprint], metadata, lines)


def load_layer(path: str | Path) -> CrimeLayer:
    """
    Read a crimegraph-layer-v1 file.

    Raises:
        InterchangeFormatError: If the file is malformed or its counts do not
            add up to the declared total
    """
    artifact = read_artifact(path, LAYER_MAGIC)
    if len(artifact.header) != 3:
        raise InterchangeFormatError("layer header needs crime type and graph fingerprint", line=1)
    _, crime_type, fingerprint = artifact.header

    counts: dict[int, int] = {}
    for lineno, fields in artifact.records:
        if len(fields) != 2:
            raise InterchangeFormatError("layer lines need node id and count", line=lineno)
        node_id = parse_int(fields[0], lineno, "node id")
        c = parse_int(fields[1], lineno, "count")
        if c <= 0:
            raise InterchangeFormatError(f"count must be positive, got {c}", line=lineno)
        if node_id in counts:
            raise InterchangeFormatError(f"duplicate node {node_id}", line=lineno)
        counts[node_id] = c
    check_count(artifact, "nodes", len(counts))

    total = sum(counts.values())
    declared = artifact.metadata.get("total_mapped", str(total))
    check_count(artifact, "total_mapped", total)
    meta = artifact.metadata
    return CrimeLayer(
        crime_type=crime_type,
        counts=counts,
        total_mapped=int(declared),
        graph_fingerprint=fingerprint,
        max_distance_m=parse_float(meta.get("max_distance_m", "0.0"), 2, "max_distance_m"),
        mean_distance_m=parse_float(meta.get("mean_distance_m", "0.0"), 2, "mean_distance_m"),
    )
