"""OSM XML extract parsing (node, way and tag elements)."""

import itertools
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import structlog

from src.services.geo import GeoPoint
from src.utils.validators import InvalidCoordinateError, MapParseError, NoStreetDataError

logger = structlog.get_logger(__name__)

# Tag values that mark a way as one-way in its digitized direction
_ONEWAY_FORWARD = frozenset({"yes", "true", "1"})
# Tag values that mark a way as one-way against its digitized direction
_ONEWAY_REVERSE = frozenset({"-1", "reverse"})


@dataclass(frozen=True, slots=True)
class Way:
    """A street way: ordered node references plus its direction flag."""

    way_id: int
    node_ids: tuple[int, ...]
    oneway: bool
    highway: str = ""


@dataclass
class RawMapExtract:
    """Nodes and street ways extracted from an OSM file."""

    nodes: dict[int, GeoPoint] = field(default_factory=dict)
    ways: list[Way] = field(default_factory=list)
    dangling_refs: int = 0

    @property
    def used_node_ids(self) -> set[int]:
        return {n for way in self.ways for n in way.node_ids}


def _byte_offset(path: Path, line: int, column: int) -> int:
    """
    Convert a 1-based line and 0-based column into a byte offset.

    The parser counts columns in characters, so the start of the failing line
    is decoded as UTF-8 to find how many bytes those characters take.
    """
    offset = 0
    with path.open("rb") as f:
        for _ in range(line - 1):
            chunk = f.readline()
            if not chunk:
                return offset
            offset += len(chunk)
        current = f.readline()
    prefix = current.decode("utf-8", errors="surrogateescape")[:column]
    return offset + len(prefix.encode("utf-8", errors="surrogateescape"))


def _is_oneway(tags: dict[str, str]) -> tuple[bool, bool]:
    """Return (oneway, reversed) for a way's tags."""
    value = tags.get("oneway", "").strip().lower()
    if value in _ONEWAY_FORWARD:
        return True, False
    if value in _ONEWAY_REVERSE:
        return True, True
    if tags.get("junction") == "roundabout" and value != "no":
        return True, False
    return False, False


def parse_osm_xml(path: str | Path, highway_filter: frozenset[str] | set[str]) -> RawMapExtract:
    """
    Stream an OSM XML extract and keep the ways whose highway tag is in the filter.

    Consecutive repeated node references inside a way are collapsed.
    References to nodes absent from the file are dropped and counted.

    Raises:
        MapParseError: If the XML is malformed (message carries the byte offset)
        NoStreetDataError: If no way matches the filter
    """
    path = Path(path)
    if not highway_filter:
        raise ValueError("highway_filter must name at least one highway class")
    if not path.is_file():
        raise MapParseError(f"Map file not found: {path}")

    coords: dict[int, GeoPoint] = {}
    candidate_ways: list[tuple[int, list[int], dict[str, str]]] = []
    skipped_nodes = 0

    try:
        context = ET.iterparse(str(path), events=("start", "end"))
        _, root = next(context)
        for event, elem in context:
            if event != "end":
                continue
            if elem.tag == "node":
                try:
                    node_id = int(elem.attrib["id"])
                    coords[node_id] = GeoPoint(float(elem.attrib["lat"]), float(elem.attrib["lon"]))
                except (KeyError, ValueError, InvalidCoordinateError):
                    skipped_nodes += 1
                root.clear()
            elif elem.tag == "way":
                tags = {t.get("k", ""): t.get("v", "") for t in elem.iter("tag")}
                if tags.get("highway") in highway_filter:
                    try:
                        refs = [int(nd.attrib["ref"]) for nd in elem.iter("nd")]
                        candidate_ways.append((int(elem.attrib["id"]), refs, tags))
                    except (KeyError, ValueError) as e:
                        raise MapParseError(f"Way element with invalid id or ref: {e}") from e
                root.clear()
            elif elem.tag in ("relation", "changeset"):
                root.clear()
    except ET.ParseError as e:
        line, column = e.position
        offset = _byte_offset(path, line, column)
        raise MapParseError(f"Malformed XML in {path}: {e}", offset) from e
    except StopIteration as e:
        raise MapParseError(f"Empty map file: {path}", 0) from e

    extract = RawMapExtract()
    for way_id, refs, tags in candidate_ways:
        present = [r for r in refs if r in coords]
        extract.dangling_refs += len(refs) - len(present)
        # collapse consecutive duplicates left by editors or by dropped references
        path_nodes = [key for key, _ in itertools.groupby(present)]
        if len(path_nodes) < 2:
            continue
        oneway, reverse = _is_oneway(tags)
        if reverse:
            path_nodes.reverse()
        extract.ways.append(Way(way_id, tuple(path_nodes), oneway, tags.get("highway", "")))

    if not extract.ways:
        raise NoStreetDataError(
            f"No street data in {path}: no way matches highway classes {sorted(highway_filter)}"
        )

    used = extract.used_node_ids
    extract.nodes = {node_id: coords[node_id] for node_id in sorted(used)}

    if extract.dangling_refs:
        logger.warning("dangling_way_refs_dropped", path=str(path), count=extract.dangling_refs)
    if skipped_nodes:
        logger.warning("invalid_nodes_skipped", path=str(path), count=skipped_nodes)
    logger.info(
        "osm_parsed",
        path=str(path),
        nodes=len(extract.nodes),
        ways=len(extract.ways),
        candidate_ways=len(candidate_ways),
    )
    return extract
