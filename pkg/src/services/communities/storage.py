"""crimegraph-communities-v1 files."""

from pathlib import Path

from src.models.pipeline import NodeWeightMode
from src.services.communities.louvain import CommunitySet
from src.services.ingest.interchange import (
    check_count,
    parse_float,
    parse_int,
    read_artifact,
    write_artifact,
)
from src.utils.validators import InterchangeFormatError

COMMUNITIES_MAGIC = "crimegraph-communities-v1"


def save_communities(cs: CommunitySet, path: str | Path) -> None:
    """Write a community file: header, metadata, then `node<TAB>community` lines."""
    metadata = [
        ("seed", cs.detection_seed),
        ("mode", cs.node_weight_mode.value),
        ("lambda", repr(cs.self_loop_scale)),
        ("modularity", repr(cs.modularity)),
        ("transform", cs.transform),
        ("communities", len(cs)),
        ("nodes", len(cs.partition)),
        ("trace", ",".join(repr(q) for q in cs.trace)),
    ]
    lines = (f"{n}\t{cs.partition[n]}" for n in sorted(cs.partition))
    write_artifact(path, [COMMUNITIES_MAGIC, cs.crime_type, cs.graph_fingerprint], metadata, lines)


def load_communities(path: str | Path) -> CommunitySet:
    """
    Read a community file.

    Raises:
        InterchangeFormatError: If the file is malformed
    """
    artifact = read_artifact(path, COMMUNITIES_MAGIC)
    if len(artifact.header) != 3:
        raise InterchangeFormatError("header needs crime type and graph fingerprint", line=1)
    _, crime_type, fingerprint = artifact.header

    partition: dict[int, int] = {}
    for lineno, fields in artifact.records:
        if len(fields) != 2:
            raise InterchangeFormatError("lines need node id and community id", line=lineno)
        node_id = parse_int(fields[0], lineno, "node id")
        if node_id in partition:
            raise InterchangeFormatError(f"duplicate node {node_id}", line=lineno)
        partition[node_id] = parse_int(fields[1], lineno, "community id")
    check_count(artifact, "nodes", len(partition))

    meta = artifact.metadata
    try:
        mode = NodeWeightMode(meta.get("mode", NodeWeightMode.IGNORE.value))
    except ValueError as e:
        raise InterchangeFormatError(f"unknown mode {meta.get('mode')!r}", line=2) from e
    trace_raw = meta.get("trace", "")
    return CommunitySet(
        partition=partition,
        crime_type=crime_type,
        detection_seed=parse_int(meta.get("seed", "0"), 2, "seed"),
        node_weight_mode=mode,
        self_loop_scale=parse_float(meta.get("lambda", "0.0"), 2, "lambda"),
        modularity=parse_float(meta.get("modularity", "0.0"), 2, "modularity"),
        trace=tuple(parse_float(q, 2, "trace value") for q in trace_raw.split(",") if q),
        graph_fingerprint=fingerprint,
        transform=meta.get("transform", ""),
    )
