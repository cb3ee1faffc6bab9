"""Unit tests for the crimegraph-v1 interchange format and the shared artifact reader."""

import numpy as np
import pytest

from src.services.geo import GeoPoint
from src.services.graph import Edge, StreetGraph
from src.services.ingest.interchange import (
    GRAPH_MAGIC,
    load_graph,
    read_artifact,
    save_graph,
    write_artifact,
)
from src.utils.validators import InterchangeFormatError


def _random_graph(n: int, seed: int) -> StreetGraph:
    rng = np.random.default_rng(seed)
    ids = rng.choice(10**9, size=n, replace=False)
    nodes = {
        int(i): GeoPoint(float(lat), float(lon))
        for i, lat, lon in zip(ids, rng.uniform(-60, 60, n), rng.uniform(-170, 170, n), strict=True)
    }
    edges = {}
    for _ in range(2 * n):
        a, b = rng.choice(ids, size=2, replace=False)
        edges[(int(a), int(b))] = Edge(int(a), int(b), float(rng.exponential(150.0)))
    return StreetGraph(nodes, edges.values(), directed=True)


# ==============================================================================
# Round-trip Tests
# ==============================================================================


def test_empty_graph_round_trip(tmp_path):
    """Test that a graph without nodes survives save and load."""
    g = StreetGraph({}, [], directed=False)
    save_graph(g, tmp_path / "g.tsv")
    assert load_graph(tmp_path / "g.tsv") == g


def test_single_node_round_trip(tmp_path):
    g = StreetGraph({7: GeoPoint(37.123456789012345, -122.98765432109876)})
    save_graph(g, tmp_path / "g.tsv")
    loaded = load_graph(tmp_path / "g.tsv")
    assert loaded == g
    assert loaded.nodes[7].lat == 37.123456789012345


def test_random_graph_resave_is_byte_identical(tmp_path):
    """Test that a 500-node graph loads equal and saves to identical bytes."""
    g = _random_graph(500, seed=1)
    first, second = tmp_path / "a.tsv", tmp_path / "b.tsv"
    save_graph(g, first)
    loaded = load_graph(first)
    assert loaded == g
    assert [e.weight for e in loaded.edges] == [e.weight for e in g.edges]
    save_graph(loaded, second)
    assert first.read_bytes() == second.read_bytes()


def test_undirected_flag_round_trip(tmp_path, grid_3x3):
    save_graph(grid_3x3, tmp_path / "g.tsv")
    loaded = load_graph(tmp_path / "g.tsv")
    assert loaded.directed is False
    assert loaded.fingerprint == grid_3x3.fingerprint


def test_file_layout(tmp_path, triangle_graph):
    """Test header, metadata and record syntax with LF endings."""
    path = tmp_path / "g.tsv"
    save_graph(triangle_graph, path)
    data = path.read_bytes()
    assert b"\r" not in data
    lines = data.decode().splitlines()
    assert lines[0] == GRAPH_MAGIC
    assert "N\t1\t37.7749\t-122.4194" in lines
    assert "E\t2\t3\t100.0" in lines
    assert lines[-1].startswith("E\t")


def test_bare_file_without_metadata(tmp_path, triangle_graph):
    """Test that a bare file holds only magic, node and edge lines and loads as directed."""
    path = tmp_path / "g.tsv"
    save_graph(triangle_graph, path, metadata=False)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == GRAPH_MAGIC
    assert all(line[:2] in ("N\t", "E\t") for line in lines[1:])
    assert len(lines) == 1 + len(triangle_graph) + len(triangle_graph.edges)

    loaded = load_graph(path)
    assert loaded.directed is True
    assert loaded.fingerprint == triangle_graph.fingerprint


# ==============================================================================
# Error Tests
# ==============================================================================


def _saved_lines(tmp_path, g):
    path = tmp_path / "g.tsv"
    save_graph(g, path)
    return path, path.read_text().splitlines(keepends=True)


def test_version_mismatch(tmp_path, triangle_graph):
    """Test that another magic line is rejected on line 1."""
    path, lines = _saved_lines(tmp_path, triangle_graph)
    path.write_text("crimegraph-v2\n" + "".join(lines[1:]))
    with pytest.raises(InterchangeFormatError, match="line 1:") as exc_info:
        load_graph(path)
    assert exc_info.value.line == 1


def test_truncated_last_line(tmp_path, triangle_graph):
    """Test a file cut in the middle of a record."""
    path, lines = _saved_lines(tmp_path, triangle_graph)
    text = "".join(lines)
    path.write_text(text[:-3])
    with pytest.raises(InterchangeFormatError, match="truncated") as exc_info:
        load_graph(path)
    assert exc_info.value.line == len(lines)


def test_truncated_at_record_boundary(tmp_path, triangle_graph):
    """Test a file missing whole trailing records."""
    path, lines = _saved_lines(tmp_path, triangle_graph)
    path.write_text("".join(lines[:-2]))
    with pytest.raises(InterchangeFormatError, match="truncated or corrupt"):
        load_graph(path)


@pytest.mark.parametrize("bad", ["nan", "inf", "-inf", "-1.0"])
def test_bad_weight_names_line(tmp_path, triangle_graph, bad):
    """Test non-finite and negative weights."""
    path, lines = _saved_lines(tmp_path, triangle_graph)
    target = next(i for i, line in enumerate(lines) if line.startswith("E\t"))
    fields = lines[target].rstrip("\n").split("\t")
    fields[3] = bad
    lines[target] = "\t".join(fields) + "\n"
    path.write_text("".join(lines))
    with pytest.raises(InterchangeFormatError, match=f"line {target + 1}:"):
        load_graph(path)


def test_edge_to_unknown_node(tmp_path, triangle_graph):
    path, lines = _saved_lines(tmp_path, triangle_graph)
    lines[-1] = "E\t1\t999\t5.0\n"
    path.write_text("".join(lines))
    with pytest.raises(InterchangeFormatError, match="unknown node 999"):
        load_graph(path)


def test_unknown_record_type(tmp_path, triangle_graph):
    path, lines = _saved_lines(tmp_path, triangle_graph)
    lines.append("X\t1\n")
    path.write_text("".join(lines))
    with pytest.raises(InterchangeFormatError, match="unknown record type"):
        load_graph(path)


def test_missing_file(tmp_path):
    with pytest.raises(InterchangeFormatError, match="not found"):
        load_graph(tmp_path / "none.tsv")


def test_empty_file(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("")
    with pytest.raises(InterchangeFormatError, match="line 1:"):
        load_graph(path)


# ==============================================================================
# Shared Artifact Reader Tests
# ==============================================================================


def test_artifact_metadata_and_records(tmp_path):
    path = tmp_path / "a.tsv"
    write_artifact(path, ["magic-v1", "extra"], [("k", 1), ("name", "x y")], ["r\t1", "r\t2"])
    artifact = read_artifact(path, "magic-v1")
    assert artifact.header == ["magic-v1", "extra"]
    assert artifact.metadata == {"k": "1", "name": "x y"}
    assert artifact.records == [(4, ["r", "1"]), (5, ["r", "2"])]


def test_metadata_after_records_rejected(tmp_path):
    path = tmp_path / "a.tsv"
    path.write_text("magic-v1\nr\t1\n#\tk\tv\n")
    with pytest.raises(InterchangeFormatError, match="line 3:"):
        read_artifact(path, "magic-v1")


def test_write_artifact_leaves_no_temp_file(tmp_path):
    write_artifact(tmp_path / "sub" / "a.tsv", ["m"], [], [])
    assert sorted(p.name for p in (tmp_path / "sub").iterdir()) == ["a.tsv"]
