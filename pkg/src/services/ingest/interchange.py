"""Line-based TSV artifact files and the crimegraph-v1 graph interchange format.

Every artifact shares one layout: line 1 is the format magic (optionally
followed by tab-separated header fields), then ``#<TAB>key<TAB>value``
metadata lines, then data records. Lines end with LF.
"""

import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import structlog

from src.services.geo import GeoPoint
from src.services.graph import Edge, StreetGraph
from src.utils.validators import (
    InterchangeFormatError,
    InvalidCoordinateError,
    validate_weight,
)

logger = structlog.get_logger(__name__)

GRAPH_MAGIC = "crimegraph-v1"


@dataclass
class ArtifactFile:
    """Parsed content of a TSV artifact."""

    header: list[str]
    metadata: dict[str, str] = field(default_factory=dict)
    records: list[tuple[int, list[str]]] = field(default_factory=list)


def write_artifact(
    path: str | Path,
    header: Sequence[str],
    metadata: Iterable[tuple[str, object]],
    lines: Iterable[str],
) -> None:
    """Write an artifact through a temporary file that replaces `path` when complete."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        with tmp.open("w", encoding="utf-8", newline="\n") as f:
            f.write("\t".join(header) + "\n")
            for key, value in metadata:
                f.write(f"#\t{key}\t{value}\n")
            for line in lines:
                f.write(line + "\n")
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def read_artifact(path: str | Path, magic: str) -> ArtifactFile:
    """
    Read an artifact whose first header field must equal `magic`.

    Raises:
        InterchangeFormatError: On a missing file, wrong magic or truncated last line
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise InterchangeFormatError(f"Artifact file not found: {path}") from e
    except UnicodeDecodeError as e:
        raise InterchangeFormatError(f"Artifact file is not UTF-8: {path}") from e

    if not text:
        raise InterchangeFormatError(f"empty file, expected '{magic}' header", line=1)
    lines = text.split("\n")
    if lines[-1] != "":
        raise InterchangeFormatError(
            "truncated file: last line has no line ending", line=len(lines)
        )
    lines.pop()

    header = lines[0].split("\t")
    if header[0] != magic:
        raise InterchangeFormatError(
            f"unsupported format '{header[0]}', expected '{magic}'", line=1
        )

    artifact = ArtifactFile(header=header)
    in_metadata = True
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            raise InterchangeFormatError("empty line", line=lineno)
        fields = line.split("\t")
        if fields[0] == "#":
            if not in_metadata:
                raise InterchangeFormatError("metadata line after data records", line=lineno)
            if len(fields) != 3:
                raise InterchangeFormatError("metadata lines need a key and a value", line=lineno)
            artifact.metadata[fields[1]] = fields[2]
            continue
        in_metadata = False
        artifact.records.append((lineno, fields))
    return artifact


def parse_int(value: str, line: int, what: str) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise InterchangeFormatError(f"invalid {what} {value!r}", line=line) from e


def parse_float(value: str, line: int, what: str) -> float:
    try:
        result = float(value)
    except ValueError as e:
        raise InterchangeFormatError(f"invalid {what} {value!r}", line=line) from e
    if not math.isfinite(result):
        raise InterchangeFormatError(f"non-finite {what} {value!r}", line=line)
    return result


def check_count(artifact: ArtifactFile, key: str, actual: int) -> None:
    """Compare a declared record count with the parsed one."""
    declared = artifact.metadata.get(key)
    if declared is None:
        return
    last_line = artifact.records[-1][0] if artifact.records else 1 + len(artifact.metadata)
    if not declared.isdigit() or int(declared) != actual:
        raise InterchangeFormatError(
            f"truncated or corrupt file: header declares {declared} {key}, found {actual}",
            line=last_line,
        )


def save_graph(g: StreetGraph, path: str | Path, metadata: bool = True) -> None:
    """
    Write `g` in crimegraph-v1 format; floats are written at full precision.

    The `#` lines carry the directed flag, record counts and fingerprint. With
    metadata=False only the magic, node and edge lines are written, and a
    reader takes such a file for a directed graph.
    """
    header = [
        ("directed", "true" if g.directed else "false"),
        ("nodes", len(g)),
        ("edges", len(g.edges)),
        ("fingerprint", g.fingerprint),
    ]
    if not metadata:
        header = []
    write_artifact(path, [GRAPH_MAGIC], header, g.canonical_lines())
    logger.debug("graph_saved", path=str(path), nodes=len(g), edges=len(g.edges))


def load_graph(path: str | Path) -> StreetGraph:
    """
    Read a crimegraph-v1 file.

    Raises:
        InterchangeFormatError: On version mismatch, truncation, malformed or
            non-finite values; the message names the offending line
    """
    artifact = read_artifact(path, GRAPH_MAGIC)
    directed_flag = artifact.metadata.get("directed", "true")
    if directed_flag not in ("true", "false"):
        raise InterchangeFormatError(f"invalid directed flag {directed_flag!r}", line=2)

    nodes: dict[int, GeoPoint] = {}
    edges: list[Edge] = []
    for lineno, fields in artifact.records:
        kind = fields[0]
        if kind == "N":
            if edges:
                raise InterchangeFormatError("node line after edge lines", line=lineno)
            if len(fields) != 4:
                raise InterchangeFormatError("node lines need id, lat and lon", line=lineno)
            node_id = parse_int(fields[1], lineno, "node id")
            if node_id in nodes:
                raise InterchangeFormatError(f"duplicate node {node_id}", line=lineno)
            lat = parse_float(fields[2], lineno, "latitude")
            lon = parse_float(fields[3], lineno, "longitude")
            try:
                nodes[node_id] = GeoPoint(lat, lon)
            except InvalidCoordinateError as e:
                raise InterchangeFormatError(str(e), line=lineno) from e
        elif kind == "E":
            if len(fields) != 4:
                raise InterchangeFormatError("edge lines need src, dst and meters", line=lineno)
            src = parse_int(fields[1], lineno, "source node")
            dst = parse_int(fields[2], lineno, "target node")
            try:
                weight = validate_weight(float(fields[3]), line=lineno)
            except ValueError as e:
                raise InterchangeFormatError(f"invalid weight {fields[3]!r}", line=lineno) from e
            for endpoint in (src, dst):
                if endpoint not in nodes:
                    raise InterchangeFormatError(
                        f"edge references unknown node {endpoint}", line=lineno
                    )
            edges.append(Edge(src, dst, weight))
        else:
            raise InterchangeFormatError(f"unknown record type {kind!r}", line=lineno)

    check_count(artifact, "nodes", len(nodes))
    check_count(artifact, "edges", len(edges))
    try:
        g = StreetGraph(nodes, edges, directed=directed_flag == "true")
    except ValueError as e:
        raise InterchangeFormatError(str(e)) from e
    logger.debug("graph_loaded", path=str(path), nodes=len(g), edges=len(g.edges))
    return g
