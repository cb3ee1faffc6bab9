"""Shared pytest fixtures and configuration for all tests."""

import os
import sys
from pathlib import Path

import pytest

# Add project root to Python path for test imports
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

# Set testing mode to skip output directory checks in Settings
os.environ["TESTING"] = "true"

from src.services.geo import GeoPoint  # noqa: E402
from src.services.graph import Edge, StreetGraph  # noqa: E402
from src.services.mapping import CrimeLayer  # noqa: E402
from tests.testkit import Hotspot, generate_grid_city, make_city  # noqa: E402

# ==============================================================================
# Graph Fixtures
# ==============================================================================


@pytest.fixture
def grid_3x3() -> StreetGraph:
    """Undirected 3×3 grid city with 100 m streets (node ids 1000..1008)."""
    return generate_grid_city(3, 3, spacing_m=100.0)


@pytest.fixture
def grid_10x10() -> StreetGraph:
    return generate_grid_city(10, 10, spacing_m=100.0)


@pytest.fixture
def triangle_graph() -> StreetGraph:
    """Directed triangle a→b→c→a plus the reverse of a→b."""
    nodes = {
        1: GeoPoint(37.7749, -122.4194),
        2: GeoPoint(37.7759, -122.4194),
        3: GeoPoint(37.7754, -122.4184),
    }
    edges = [Edge(1, 2, 111.2), Edge(2, 1, 111.2), Edge(2, 3, 100.0), Edge(3, 1, 100.5)]
    return StreetGraph(nodes, edges, directed=True)


@pytest.fixture
def zero_layer(grid_3x3) -> CrimeLayer:
    return CrimeLayer("ASSAULT", {}, 0, grid_3x3.fingerprint)


# ==============================================================================
# File Fixtures
# ==============================================================================

OSM_SAMPLE = """<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6" generator="hand">
  <node id="1" lat="37.7749" lon="-122.4194"/>
  <node id="2" lat="37.7759" lon="-122.4194"/>
  <node id="3" lat="37.7769" lon="-122.4194"/>
  <node id="4" lat="37.7769" lon="-122.4184">
    <tag k="highway" v="traffic_signals"/>
  </node>
  <node id="5" lat="37.7700" lon="-122.4000"/>
  <way id="10">
    <nd ref="1"/>
    <nd ref="2"/>
    <nd ref="3"/>
    <tag k="highway" v="residential"/>
    <tag k="name" v="Market Street"/>
  </way>
  <way id="11">
    <nd ref="3"/>
    <nd ref="4"/>
    <tag k="highway" v="primary"/>
    <tag k="oneway" v="yes"/>
  </way>
  <way id="12">
    <nd ref="4"/>
    <nd ref="5"/>
    <tag k="highway" v="footway"/>
  </way>
</osm>
"""


@pytest.fixture
def osm_file(tmp_path) -> Path:
    """Small OSM extract: a residential way 1-2-3, a one-way primary 3→4, a footway 4-5."""
    path = tmp_path / "city.osm"
    path.write_text(OSM_SAMPLE, encoding="utf-8")
    return path


SF_CSV = """IncidntNum,Category,Descript,DayOfWeek,Date,Time,PdDistrict,Resolution,Address,X,Y
150060275,NON-CRIMINAL,LOST PROPERTY,Monday,01/19/2015,14:00,MISSION,NONE,18TH ST / VALENCIA ST,-122.42158168137,37.7617007179518
150098210,ROBBERY,ROBBERY,Sunday,02/01/2015,15:45,TENDERLOIN,NONE,300 Block of LEAVENWORTH ST,-122.414406029855,37.7841907151119
150098210,ASSAULT,AGGRAVATED ASSAULT WITH BODILY FORCE,Sunday,02/01/2015,15:45,TENDERLOIN,NONE,300 Block of LEAVENWORTH ST,-122.414406029855,37.7841907151119
150098226,VANDALISM,VANDALISM,Tuesday,01/27/2015,19:00,NORTHERN,NONE,LOMBARD ST / LAGUNA ST,-122.431118543788,37.8004687042875
150098232,LARCENY/THEFT,PETTY THEFT,Sunday,02/01/2015,18:00,BAYVIEW,NONE,1200 Block of 3RD ST,-122.38987800357,37.7698677930228
"""


@pytest.fixture
def sf_csv(tmp_path) -> Path:
    """Five rows in the San Francisco open-data export layout (X = lon, Y = lat)."""
    path = tmp_path / "sf_sample.csv"
    path.write_text(SF_CSV, encoding="utf-8")
    return path


# ==============================================================================
# Synthetic City Fixtures
# ==============================================================================


@pytest.fixture
def hotspot_city():
    """20×20 grid with one dense ASSAULT hotspot and a light THEFT hotspot."""
    hotspots = [
        Hotspot(center=1000 + 5 * 20 + 5, radius=2, crime_type="ASSAULT", rate=25.0),
        Hotspot(center=1000 + 14 * 20 + 14, radius=1, crime_type="THEFT", rate=6.0),
    ]
    return make_city(20, 20, hotspots, spacing_m=100.0, seed=7)
