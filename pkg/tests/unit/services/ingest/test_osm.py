"""Unit tests for OSM XML parsing."""

import pytest

from src.config import DEFAULT_HIGHWAY_CLASSES
from src.services.geo import GeoPoint
from src.services.ingest.osm import parse_osm_xml
from src.utils.validators import MapParseError, NoStreetDataError

DRIVABLE = frozenset(DEFAULT_HIGHWAY_CLASSES.split(","))


def _osm(tmp_path, body: str):
    path = tmp_path / "extract.osm"
    path.write_text(f'<?xml version="1.0"?>\n<osm version="0.6">\n{body}</osm>\n', encoding="utf-8")
    return path


def _way(way_id, refs, **tags):
    nds = "".join(f'<nd ref="{r}"/>' for r in refs)
    tag_xml = "".join(f'<tag k="{k}" v="{v}"/>' for k, v in tags.items())
    return f'<way id="{way_id}">{nds}{tag_xml}</way>\n'


def _nodes(*ids):
    return "".join(f'<node id="{i}" lat="{37.0 + i / 1000}" lon="{-122.0 - i / 1000}"/>\n' for i in ids)


# ==============================================================================
# Extraction Tests
# ==============================================================================


def test_two_nodes_one_way(tmp_path):
    """Test the smallest useful extract."""
    path = _osm(tmp_path, _nodes(1, 2) + _way(10, [1, 2], highway="residential"))
    extract = parse_osm_xml(path, DRIVABLE)
    assert len(extract.nodes) == 2
    assert len(extract.ways) == 1
    assert extract.ways[0].node_ids == (1, 2)
    assert extract.ways[0].oneway is False


def test_sample_fixture(osm_file):
    """Test the shared fixture: footway dropped, node order and one-way kept."""
    extract = parse_osm_xml(osm_file, DRIVABLE)
    assert [w.way_id for w in extract.ways] == [10, 11]
    assert extract.ways[0].node_ids == (1, 2, 3)
    assert extract.ways[1].oneway is True
    assert sorted(extract.nodes) == [1, 2, 3, 4]
    assert extract.nodes[4] == GeoPoint(37.7769, -122.4184)
    assert extract.dangling_refs == 0


def test_filter_selects_classes(osm_file):
    extract = parse_osm_xml(osm_file, {"footway"})
    assert [w.way_id for w in extract.ways] == [12]
    assert sorted(extract.nodes) == [4, 5]


def test_dangling_reference_dropped_and_counted(tmp_path):
    """Test that a missing node is removed from its way and counted once."""
    path = _osm(tmp_path, _nodes(1, 2, 3) + _way(10, [1, 99, 2, 3], highway="residential"))
    extract = parse_osm_xml(path, DRIVABLE)
    assert extract.ways[0].node_ids == (1, 2, 3)
    assert extract.dangling_refs == 1


def test_consecutive_duplicates_collapsed(tmp_path):
    path = _osm(tmp_path, _nodes(1, 2, 3) + _way(10, [1, 1, 2, 2, 3], highway="tertiary"))
    extract = parse_osm_xml(path, DRIVABLE)
    assert extract.ways[0].node_ids == (1, 2, 3)


def test_way_reduced_to_single_node_is_dropped(tmp_path):
    body = _nodes(1, 2, 3) + _way(10, [1, 98], highway="residential") + _way(11, [2, 3], highway="residential")
    extract = parse_osm_xml(_osm(tmp_path, body), DRIVABLE)
    assert [w.way_id for w in extract.ways] == [11]
    assert extract.dangling_refs == 1


@pytest.mark.parametrize(
    "tags,oneway,order",
    [
        ({"oneway": "yes"}, True, (1, 2, 3)),
        ({"oneway": "true"}, True, (1, 2, 3)),
        ({"oneway": "1"}, True, (1, 2, 3)),
        ({"oneway": "-1"}, True, (3, 2, 1)),
        ({"oneway": "no"}, False, (1, 2, 3)),
        ({"junction": "roundabout"}, True, (1, 2, 3)),
        ({"junction": "roundabout", "oneway": "no"}, False, (1, 2, 3)),
        ({}, False, (1, 2, 3)),
    ],
)
def test_oneway_tags(tmp_path, tags, oneway, order):
    """Test one-way values, reversed ways and roundabouts."""
    path = _osm(tmp_path, _nodes(1, 2, 3) + _way(10, [1, 2, 3], highway="primary", **tags))
    way = parse_osm_xml(path, DRIVABLE).ways[0]
    assert way.oneway is oneway
    assert way.node_ids == order


def test_fifty_node_fixture_matches_manifest(tmp_path):
    """Test a 50-node extract built together with its expected manifest."""
    ids = list(range(1, 51))
    body = _nodes(*ids)
    manifest = {}
    for k in range(5):
        refs = ids[k * 10 : (k + 1) * 10]
        body += _way(100 + k, refs, highway="residential" if k % 2 else "secondary")
        manifest[100 + k] = tuple(refs)
    body += _way(200, ids[:5], highway="service")
    extract = parse_osm_xml(_osm(tmp_path, body), DRIVABLE)
    assert {w.way_id: w.node_ids for w in extract.ways} == manifest
    assert sorted(extract.nodes) == ids


# ==============================================================================
# Error Tests
# ==============================================================================


def test_malformed_xml_reports_byte_offset(tmp_path):
    """Test that a syntax error carries the byte offset of the failure."""
    text = '<?xml version="1.0"?>\n<osm>\n<node id="1" lat="1" lon="1">\n</osm>\n'
    path = tmp_path / "broken.osm"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(MapParseError, match="byte offset") as exc_info:
        parse_osm_xml(path, DRIVABLE)
    offset = exc_info.value.byte_offset
    assert offset is not None
    # the mismatched closing tag sits on line 4
    assert len(text.encode().split(b"\n", 3)[0]) < offset <= len(text.encode())


def test_byte_offset_counts_multibyte_characters(tmp_path):
    """Test that multibyte characters before the error count with their encoded length."""
    line = '<way id="1"><tag k="name" v="Straße Ärger"/></node>'
    text = f'<?xml version="1.0"?>\n<osm>\n{line}\n</osm>\n'
    path = tmp_path / "broken.osm"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(MapParseError) as exc_info:
        parse_osm_xml(path, DRIVABLE)
    offset = exc_info.value.byte_offset
    # the parser points at the name of the mismatched closing tag
    assert text.encode()[offset - 2 : offset + 5] == b"</node>"


def test_no_matching_way(tmp_path):
    """Test that an extract without street ways is rejected."""
    path = _osm(tmp_path, _nodes(1, 2) + _way(10, [1, 2], highway="footway"))
    with pytest.raises(NoStreetDataError, match="No street data"):
        parse_osm_xml(path, DRIVABLE)


def test_missing_file(tmp_path):
    with pytest.raises(MapParseError):
        parse_osm_xml(tmp_path / "missing.osm", DRIVABLE)


def test_empty_filter_rejected(osm_file):
    with pytest.raises(ValueError):
        parse_osm_xml(osm_file, frozenset())


def test_invalid_node_coordinates_are_skipped(tmp_path):
    body = '<node id="1" lat="95" lon="0"/>\n' + _nodes(2, 3) + _way(10, [1, 2, 3], highway="residential")
    extract = parse_osm_xml(_osm(tmp_path, body), DRIVABLE)
    assert extract.ways[0].node_ids == (2, 3)
    assert extract.dangling_refs == 1
