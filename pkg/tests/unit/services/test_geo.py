"""Unit tests for great-circle distance and the grid spatial index."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.services.geo import (
    EARTH_RADIUS_M,
    EarthModel,
    GeoPoint,
    build_spatial_index,
    great_circle_distance,
    nearest_node,
    nearest_nodes,
    pairwise_distances,
)
from src.utils.validators import InvalidCoordinateError, SpatialIndexError
from tests.testkit import haversine_distance, oracle_nearest

lats = st.floats(min_value=-90, max_value=90, allow_nan=False)
lons = st.floats(min_value=-180, max_value=180, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)

# ==============================================================================
# GeoPoint / EarthModel Tests
# ==============================================================================


@pytest.mark.parametrize(
    "lat,lon",
    [(91.0, 0.0), (-90.5, 0.0), (0.0, 180.1), (0.0, -181.0), (math.nan, 0.0), (0.0, math.inf)],
)
def test_geopoint_rejects_invalid_coordinates(lat, lon):
    """Test that out-of-range and non-finite coordinates are rejected."""
    with pytest.raises(InvalidCoordinateError):
        GeoPoint(lat, lon)


def test_geopoint_accepts_boundaries():
    """Test that the inclusive range limits are valid."""
    assert GeoPoint(90.0, 180.0).lat == 90.0
    assert GeoPoint(-90.0, -180.0).lon == -180.0


@pytest.mark.parametrize("radius", [0.0, -1.0, math.inf])
def test_earth_model_rejects_bad_radius(radius):
    with pytest.raises(ValueError):
        EarthModel(radius)


# ==============================================================================
# great_circle_distance Tests
# ==============================================================================


def test_identical_points_are_zero():
    """Test that a point is at distance 0 from itself."""
    p = GeoPoint(37.77, -122.42)
    assert great_circle_distance(p, p) == 0.0


def test_antipodal_points():
    """Test that (0, 0) and (0, 180) are half a circumference apart."""
    d = great_circle_distance(GeoPoint(0, 0), GeoPoint(0, 180))
    assert d == pytest.approx(math.pi * EARTH_RADIUS_M, rel=1e-6)
    assert d == pytest.approx(20_015_086.8, abs=0.1)


def test_san_francisco_pair_matches_haversine():
    """Test a short city-scale pair against the haversine formula."""
    a = GeoPoint(37.7749, -122.4194)
    b = GeoPoint(37.7849, -122.4094)
    expected = haversine_distance(a.lat, a.lon, b.lat, b.lon)
    assert great_circle_distance(a, b) == pytest.approx(expected, rel=1e-3)


def test_random_pairs_match_haversine():
    """Test 10^4 seeded pairs across the globe against the haversine formula (0.1% relative)."""
    rng = np.random.default_rng(2015)
    lat = rng.uniform(-90.0, 90.0, size=(10_000, 2))
    lon = rng.uniform(-180.0, 180.0, size=(10_000, 2))

    checked = 0
    for (lat1, lat2), (lon1, lon2) in zip(lat.tolist(), lon.tolist(), strict=True):
        expected = haversine_distance(lat1, lon1, lat2, lon2)
        if expected <= 1.0:
            continue
        d = great_circle_distance(GeoPoint(lat1, lon1), GeoPoint(lat2, lon2))
        assert abs(d - expected) <= 1e-3 * expected, (lat1, lon1, lat2, lon2)
        checked += 1
    assert checked > 9_900


def test_custom_earth_radius_scales_distance():
    a, b = GeoPoint(0, 0), GeoPoint(0, 90)
    assert great_circle_distance(a, b, EarthModel(1.0)) == pytest.approx(math.pi / 2)


@given(points, points)
def test_distance_is_symmetric(a, b):
    """Test that swapping the arguments gives a bit-identical result."""
    assert great_circle_distance(a, b) == great_circle_distance(b, a)


@given(points, points)
def test_distance_is_bounded(a, b):
    d = great_circle_distance(a, b)
    assert 0.0 <= d <= math.pi * EARTH_RADIUS_M + 1e-6


@given(points)
def test_distance_identity(a):
    assert great_circle_distance(a, a) == 0.0


def test_pairwise_distances_match_scalar_kernel():
    """Test that the matrix form agrees with the scalar form for separated points."""
    rng = np.random.default_rng(3)
    a_lat, a_lon = rng.uniform(-60, 60, 20), rng.uniform(-170, 170, 20)
    b_lat, b_lon = rng.uniform(-60, 60, 15), rng.uniform(-170, 170, 15)
    matrix = pairwise_distances(a_lat, a_lon, b_lat, b_lon)
    assert matrix.shape == (20, 15)
    for i in range(20):
        for j in range(15):
            scalar = great_circle_distance(
                GeoPoint(a_lat[i], a_lon[i]), GeoPoint(b_lat[j], b_lon[j])
            )
            assert matrix[i, j] == pytest.approx(scalar, rel=1e-9)


def test_pairwise_distances_zero_on_identical_points():
    lat = np.array([37.7749, 37.7750])
    lon = np.array([-122.4194, -122.4194])
    matrix = pairwise_distances(lat, lon, lat, lon)
    assert matrix[0, 0] == 0.0
    assert matrix[1, 1] == 0.0


# ==============================================================================
# Spatial Index Tests
# ==============================================================================


def test_build_index_rejects_empty_list():
    """Test that an index needs at least one node."""
    with pytest.raises(SpatialIndexError):
        build_spatial_index([])


def test_build_index_rejects_duplicate_ids():
    """Test that node ids must be unique."""
    nodes = [(1, GeoPoint(0, 0)), (1, GeoPoint(1, 1))]
    with pytest.raises(SpatialIndexError, match="Duplicate"):
        build_spatial_index(nodes)


def test_build_index_rejects_bad_cell_size():
    with pytest.raises(SpatialIndexError):
        build_spatial_index([(1, GeoPoint(0, 0))], cell_m=0)


@pytest.mark.parametrize(
    "query",
    [GeoPoint(37.0, -122.0), GeoPoint(-45.0, 170.0), GeoPoint(89.9, 0.0), GeoPoint(37.77, -122.42)],
)
def test_single_node_index_always_answers_that_node(query):
    """Test that every query on a one-node index returns the node."""
    idx = build_spatial_index([(42, GeoPoint(37.77, -122.42))])
    node_id, dist = nearest_node(idx, query)
    assert node_id == 42
    assert dist == pytest.approx(great_circle_distance(query, GeoPoint(37.77, -122.42)))


def test_index_contains_exactly_its_nodes(grid_10x10):
    idx = build_spatial_index(list(grid_10x10.nodes.items()))
    assert len(idx) == 100
    assert sorted(idx.node_ids) == sorted(grid_10x10.nodes)


def test_query_coincident_with_node(grid_10x10):
    """Test that a query on top of a node returns it at distance 0."""
    idx = build_spatial_index(list(grid_10x10.nodes.items()))
    for node_id, p in list(grid_10x10.nodes.items())[::7]:
        assert nearest_node(idx, p) == (node_id, 0.0)


def test_tie_goes_to_smallest_id():
    """Test that equidistant nodes resolve to the smaller id."""
    nodes = [(7, GeoPoint(0.0, 0.001)), (3, GeoPoint(0.0, -0.001))]
    idx = build_spatial_index(nodes)
    node_id, _ = nearest_node(idx, GeoPoint(0.0, 0.0))
    assert node_id == 3


def test_coincident_nodes_resolve_to_smallest_id():
    nodes = [(9, GeoPoint(10.0, 10.0)), (4, GeoPoint(10.0, 10.0)), (6, GeoPoint(10.5, 10.0))]
    idx = build_spatial_index(nodes)
    assert nearest_node(idx, GeoPoint(10.0, 10.0)) == (4, 0.0)


def test_queries_far_outside_the_grid():
    """Test queries many cells away from every node."""
    rng = np.random.default_rng(11)
    nodes = [
        (i, GeoPoint(float(lat), float(lon)))
        for i, (lat, lon) in enumerate(
            zip(rng.uniform(37.70, 37.80, 200), rng.uniform(-122.50, -122.40, 200), strict=True)
        )
    ]
    idx = build_spatial_index(nodes, cell_m=100.0)
    plain = [(i, p.lat, p.lon) for i, p in nodes]
    for q in (GeoPoint(38.5, -121.0), GeoPoint(36.0, -124.0), GeoPoint(37.75, -110.0)):
        node_id, _ = nearest_node(idx, q)
        assert node_id == oracle_nearest(plain, q.lat, q.lon)


def test_nearest_matches_brute_force_on_random_nodes():
    """Test 1,000 random queries over 1,000 random nodes against a linear scan."""
    rng = np.random.default_rng(2024)
    node_lats = rng.uniform(37.70, 37.82, 1000)
    node_lons = rng.uniform(-122.52, -122.36, 1000)
    ids = rng.permutation(10_000)[:1000]
    nodes = [
        (int(i), GeoPoint(float(a), float(b)))
        for i, a, b in zip(ids, node_lats, node_lons, strict=True)
    ]
    plain = [(i, p.lat, p.lon) for i, p in nodes]
    idx = build_spatial_index(nodes, cell_m=250.0)

    q_lats = rng.uniform(37.69, 37.83, 1000)
    q_lons = rng.uniform(-122.53, -122.35, 1000)
    results = nearest_nodes(idx, [GeoPoint(a, b) for a, b in zip(q_lats, q_lons, strict=True)])
    for (got, _), lat, lon in zip(results, q_lats, q_lons, strict=True):
        assert got == oracle_nearest(plain, float(lat), float(lon))


def test_nearest_matches_brute_force_on_wide_extent():
    """Test a continental extent where cells widen with latitude."""
    rng = np.random.default_rng(5)
    nodes = [
        (int(i), GeoPoint(float(a), float(b)))
        for i, a, b in zip(
            range(300), rng.uniform(-60, 70, 300), rng.uniform(-150, 150, 300), strict=True
        )
    ]
    plain = [(i, p.lat, p.lon) for i, p in nodes]
    idx = build_spatial_index(nodes)
    for lat, lon in zip(rng.uniform(-80, 80, 200), rng.uniform(-179, 179, 200), strict=True):
        got, _ = nearest_node(idx, GeoPoint(float(lat), float(lon)))
        assert got == oracle_nearest(plain, float(lat), float(lon))


def test_index_queries_do_not_mutate(grid_3x3):
    idx = build_spatial_index(list(grid_3x3.nodes.items()))
    before = (len(idx), idx.shape, sorted(idx.node_ids))
    nearest_nodes(idx, [GeoPoint(37.75, -122.45)] * 10)
    assert (len(idx), idx.shape, sorted(idx.node_ids)) == before


def test_nearest_nodes_empty_query_list(grid_3x3):
    idx = build_spatial_index(list(grid_3x3.nodes.items()))
    assert nearest_nodes(idx, []) == []
