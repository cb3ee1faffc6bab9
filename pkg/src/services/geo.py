"""Great-circle geodesy and a uniform lat/lon grid index for nearest-node queries."""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
import structlog

from src.utils.validators import SpatialIndexError, validate_coordinates

logger = structlog.get_logger(__name__)

# Earth's mean radius in meters
EARTH_RADIUS_M = 6_371_000.0

# Candidates whose vectorized distance lies this close to the best one are
# re-ranked with the scalar kernel so results match great_circle_distance exactly.
_RERANK_ABS_M = 0.5
_RERANK_REL = 1e-9


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A position in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        validate_coordinates(self.lat, self.lon)


@dataclass(frozen=True, slots=True)
class EarthModel:
    """Spherical earth used by every distance computation of a run."""

    radius: float = EARTH_RADIUS_M

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"Earth radius must be positive and finite, got {self.radius}")


DEFAULT_EARTH = EarthModel()


def great_circle_distance(a: GeoPoint, b: GeoPoint, m: EarthModel = DEFAULT_EARTH) -> float:
    """Spherical law-of-cosines distance in meters.

    The arccos argument is clamped to [-1, 1]. Operand order is fixed so the
    result is bit-identical when the arguments are swapped.
    """
    if a.lat == b.lat and a.lon == b.lon:
        return 0.0
    lat_a = math.radians(a.lat)
    lat_b = math.radians(b.lat)
    dlon = math.radians(abs(a.lon - b.lon))
    cos_angle = math.sin(lat_a) * math.sin(lat_b) + math.cos(lat_a) * math.cos(lat_b) * math.cos(
        dlon
    )
    cos_angle = max(-1.0, min(1.0, cos_angle))
    return m.radius * math.acos(cos_angle)


def pairwise_distances(
    lats_a: np.ndarray,
    lons_a: np.ndarray,
    lats_b: np.ndarray,
    lons_b: np.ndarray,
    m: EarthModel = DEFAULT_EARTH,
) -> np.ndarray:
    """Law-of-cosines distance matrix in meters, shape (len(a), len(b))."""
    lat_a = np.radians(np.asarray(lats_a, dtype=np.float64))[:, None]
    lat_b = np.radians(np.asarray(lats_b, dtype=np.float64))[None, :]
    dlon = np.radians(np.abs(np.asarray(lons_a)[:, None] - np.asarray(lons_b)[None, :]))
    cos_angle = np.sin(lat_a) * np.sin(lat_b) + np.cos(lat_a) * np.cos(lat_b) * np.cos(dlon)
    dists = m.radius * np.arccos(np.clip(cos_angle, -1.0, 1.0))
    dists[(lat_a == lat_b) & (dlon == 0.0)] = 0.0
    return dists


class SpatialIndex:
    """Uniform lat/lon cell grid over a fixed node set.

    Queries expand square rings of cells around the query cell until every
    node that could be closer than the best candidate has been inspected.
    Candidate distances are always exact great-circle distances. Extents that
    cross the antimeridian are not supported.
    """

    def __init__(
        self,
        ids: np.ndarray,
        lats: np.ndarray,
        lons: np.ndarray,
        cell_lat: float,
        cell_lon: float,
        earth: EarthModel = DEFAULT_EARTH,
    ):
        self._ids = ids
        self._lats = lats
        self._lons = lons
        self._earth = earth
        self._cell_lat = cell_lat
        self._cell_lon = cell_lon
        self._lat0 = float(lats.min())
        self._lon0 = float(lons.min())

        cx = self._cell_x(lons)
        cy = self._cell_y(lats)
        self._nx = int(cx.max()) + 1
        self._ny = int(cy.max()) + 1

        cells: dict[tuple[int, int], list[int]] = {}
        for pos, key in enumerate(zip(cx.tolist(), cy.tolist(), strict=True)):
            cells.setdefault(key, []).append(pos)
        self._cells = {key: np.asarray(members, dtype=np.int64) for key, members in cells.items()}

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def node_ids(self) -> list[int]:
        """Node ids held by the index, in build order."""
        return self._ids.tolist()

    @property
    def shape(self) -> tuple[int, int]:
        """Grid dimensions as (columns, rows)."""
        return self._nx, self._ny

    def _cell_x(self, lons: np.ndarray) -> np.ndarray:
        return np.floor((lons - self._lon0) / self._cell_lon).astype(np.int64)

    def _cell_y(self, lats: np.ndarray) -> np.ndarray:
        return np.floor((lats - self._lat0) / self._cell_lat).astype(np.int64)

    def _ring(self, qx: int, qy: int, r: int) -> list[np.ndarray]:
        """Node positions in cells at Chebyshev distance r from (qx, qy), clipped to the grid."""
        found: list[np.ndarray] = []
        x_lo, x_hi = max(qx - r, 0), min(qx + r, self._nx - 1)
        y_lo, y_hi = max(qy - r, 0), min(qy + r, self._ny - 1)
        if x_lo > x_hi or y_lo > y_hi:
            return found
        if r == 0:
            members = self._cells.get((qx, qy))
            return [members] if members is not None else found
        for x in range(x_lo, x_hi + 1):
            for y in (qy - r, qy + r):
                if y_lo <= y <= y_hi:
                    members = self._cells.get((x, y))
                    if members is not None:
                        found.append(members)
        for y in range(max(qy - r + 1, y_lo), min(qy + r - 1, y_hi) + 1):
            for x in (qx - r, qx + r):
                if x_lo <= x <= x_hi:
                    members = self._cells.get((x, y))
                    if members is not None:
                        found.append(members)
        return found

    def _covered_radius(
        self, qx: int, qy: int, r: int, lats: np.ndarray, lons: np.ndarray
    ) -> np.ndarray:
        """Lower bound, per query, on the distance to any node outside the block of radius r."""
        radius = self._earth.radius
        bound = np.full(len(lats), np.inf)

        # A block side at or past the grid edge has no nodes beyond it
        lat_margin = np.full(len(lats), np.inf)
        if qy - r > 0:
            lat_margin = np.minimum(lat_margin, lats - (self._lat0 + (qy - r) * self._cell_lat))
        if qy + r < self._ny - 1:
            high = self._lat0 + (qy + r + 1) * self._cell_lat
            lat_margin = np.minimum(lat_margin, high - lats)
        bound = np.minimum(bound, radius * np.radians(np.maximum(lat_margin, 0.0)))

        lon_margin = np.full(len(lons), np.inf)
        if qx - r > 0:
            lon_margin = np.minimum(lon_margin, lons - (self._lon0 + (qx - r) * self._cell_lon))
        if qx + r < self._nx - 1:
            high = self._lon0 + (qx + r + 1) * self._cell_lon
            lon_margin = np.minimum(lon_margin, high - lons)
        finite = np.isfinite(lon_margin)
        if finite.any():
            # Distance from a point to the meridian `margin` degrees away
            margin = np.clip(lon_margin[finite], 0.0, 90.0)
            sin_d = np.cos(np.radians(lats[finite])) * np.sin(np.radians(margin))
            lon_bound = radius * np.arcsin(np.clip(sin_d, 0.0, 1.0))
            bound[finite] = np.minimum(bound[finite], lon_bound)
        return bound

    def _query_cell(
        self, qx: int, qy: int, lats: np.ndarray, lons: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Resolve all queries that fall into grid cell (qx, qy)."""
        n_queries = len(lats)
        best_pos = np.full(n_queries, -1, dtype=np.int64)
        best_dist = np.full(n_queries, np.inf)

        # Rings closer than the grid rectangle hold no cells
        r = max(0, -qx, qx - (self._nx - 1), -qy, qy - (self._ny - 1))
        pending = np.arange(n_queries)
        candidates = np.empty(0, dtype=np.int64)

        while len(pending):
            ring = self._ring(qx, qy, r)
            if ring:
                candidates = np.concatenate([candidates, *ring])
            if len(candidates):
                dists = pairwise_distances(
                    lats[pending],
                    lons[pending],
                    self._lats[candidates],
                    self._lons[candidates],
                    self._earth,
                )
                best = dists.min(axis=1)
                margin = _RERANK_ABS_M + _RERANK_REL * best
                covered = self._covered_radius(qx, qy, r, lats[pending], lons[pending])
                done = best + margin <= covered
                for row in np.flatnonzero(done).tolist():
                    q = int(pending[row])
                    close = candidates[dists[row] <= best[row] + margin[row]]
                    best_pos[q], best_dist[q] = self._rerank(float(lats[q]), float(lons[q]), close)
                pending = pending[~done]
            r += 1
        return best_pos, best_dist

    def _rerank(self, lat: float, lon: float, positions: np.ndarray) -> tuple[int, float]:
        """Pick the exact nearest among close candidates; ties go to the smallest id."""
        q = GeoPoint(lat, lon)
        best: tuple[float, int, int] | None = None
        for pos in positions.tolist():
            d = great_circle_distance(
                q, GeoPoint(float(self._lats[pos]), float(self._lons[pos])), self._earth
            )
            key = (d, int(self._ids[pos]), pos)
            if best is None or key < best:
                best = key
        assert best is not None
        return best[2], best[0]

    def query_many(self, lats: np.ndarray, lons: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest node id and distance in meters for each query point.

        Args:
            lats: Query latitudes in degrees
            lons: Query longitudes in degrees

        Returns:
            Tuple of (node id array, distance array) aligned with the queries
        """
        lats = np.asarray(lats, dtype=np.float64)
        lons = np.asarray(lons, dtype=np.float64)
        n = len(lats)
        out_pos = np.empty(n, dtype=np.int64)
        out_dist = np.empty(n, dtype=np.float64)
        if n == 0:
            return np.empty(0, dtype=np.int64), out_dist

        qx = self._cell_x(lons)
        qy = self._cell_y(lats)
        keys = np.stack([qx, qy], axis=1)
        unique_keys, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(unique_keys) + 1))

        for group, (cx, cy) in enumerate(unique_keys.tolist()):
            members = order[bounds[group] : bounds[group + 1]]
            pos, dist = self._query_cell(int(cx), int(cy), lats[members], lons[members])
            out_pos[members] = pos
            out_dist[members] = dist

        return self._ids[out_pos], out_dist


def build_spatial_index(
    nodes: Sequence[tuple[int, GeoPoint]],
    cell_m: float = 250.0,
    earth: EarthModel = DEFAULT_EARTH,
) -> SpatialIndex:
    """
    Build a grid index over (node id, point) pairs.

    The cell edge is `cell_m` meters, widened when needed so that the grid holds
    roughly one cell per node for sparse, wide extents.

    Raises:
        SpatialIndexError: If the node list is empty or contains duplicate ids
    """
    if not nodes:
        raise SpatialIndexError("Cannot build a spatial index from an empty node list")
    if cell_m <= 0:
        raise SpatialIndexError(f"Cell size must be positive, got {cell_m}")

    ids = np.fromiter((node_id for node_id, _ in nodes), dtype=np.int64, count=len(nodes))
    if len(np.unique(ids)) != len(ids):
        values, counts = np.unique(ids, return_counts=True)
        raise SpatialIndexError(f"Duplicate node ids: {values[counts > 1][:5].tolist()}")
    lats = np.fromiter((p.lat for _, p in nodes), dtype=np.float64, count=len(nodes))
    lons = np.fromiter((p.lon for _, p in nodes), dtype=np.float64, count=len(nodes))

    cell_lat = math.degrees(cell_m / earth.radius)
    mid_lat = math.radians(float(np.abs(lats).max()))
    cell_lon = cell_lat / max(math.cos(mid_lat), 0.01)

    lat_extent = float(lats.max() - lats.min())
    lon_extent = float(lons.max() - lons.min())
    n_cells = (lat_extent / cell_lat + 1) * (lon_extent / cell_lon + 1)
    if n_cells > 4 * len(ids):
        scale = math.sqrt(n_cells / (4 * len(ids)))
        cell_lat *= scale
        cell_lon *= scale

    index = SpatialIndex(ids, lats, lons, cell_lat, cell_lon, earth)
    logger.debug(
        "spatial_index_built",
        nodes=len(index),
        columns=index.shape[0],
        rows=index.shape[1],
    )
    return index


def nearest_node(idx: SpatialIndex, q: GeoPoint) -> tuple[int, float]:
    """Nearest node to q as (node id, meters); ties go to the smallest node id."""
    ids, dists = idx.query_many(np.array([q.lat]), np.array([q.lon]))
    return int(ids[0]), float(dists[0])


def nearest_nodes(idx: SpatialIndex, points: Iterable[GeoPoint]) -> list[tuple[int, float]]:
    """Bulk form of nearest_node."""
    pts = list(points)
    lats = np.fromiter((p.lat for p in pts), dtype=np.float64, count=len(pts))
    lons = np.fromiter((p.lon for p in pts), dtype=np.float64, count=len(pts))
    ids, dists = idx.query_many(lats, lons)
    return list(zip(ids.tolist(), dists.tolist(), strict=True))
