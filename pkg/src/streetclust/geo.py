"""Coordinate projection, spatial indexing and point deduplication.

All distances in this package are planar Euclidean distances between
Web Mercator (EPSG:3857) coordinates, i.e. meters up to the Mercator
scale distortion. At city scale (a few km) that distortion is well below
the spatial tolerances used anywhere downstream, so no geodesic
correction is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

EARTH_RADIUS_M = 6378137.0
# Latitude where the square Web Mercator map ends; poles are not representable.
MAX_ABS_LAT = 85.051129


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate, longitude/latitude in degrees."""

    lon: float
    lat: float

    def __post_init__(self) -> None:
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")
        if not -MAX_ABS_LAT < self.lat < MAX_ABS_LAT:
            raise ValueError(
                f"latitude {self.lat} outside Web Mercator validity "
                f"(-{MAX_ABS_LAT}, {MAX_ABS_LAT})"
            )


@dataclass(frozen=True)
class ProjectedPoint:
    """EPSG:3857 coordinate in meters."""

    x: float
    y: float


def project(p: GeoPoint) -> ProjectedPoint:
    """Spherical Mercator forward projection.

    Uses the atanh(sin) form of ln(tan(pi/4 + lat/2)), which is exact at
    the equator and better conditioned near it.
    """
    x = EARTH_RADIUS_M * math.radians(p.lon)
    y = EARTH_RADIUS_M * math.atanh(math.sin(math.radians(p.lat)))
    return ProjectedPoint(x, y)


def unproject(p: ProjectedPoint) -> GeoPoint:
    """Inverse of :func:`project`.

    Degree conversion can overshoot the domain boundary by one ulp, so the
    result is clamped back into Web Mercator validity.
    """
    lon = math.degrees(p.x / EARTH_RADIUS_M)
    lat = math.degrees(2.0 * math.atan(math.exp(p.y / EARTH_RADIUS_M)) - math.pi / 2.0)
    lon = min(180.0, max(-180.0, lon))
    lat = min(math.nextafter(MAX_ABS_LAT, 0.0), max(math.nextafter(-MAX_ABS_LAT, 0.0), lat))
    return GeoPoint(lon, lat)


class SpatialIndex:
    """Immutable KD-tree over projected record coordinates.

    Safe for concurrent read queries once built. Query results are
    guaranteed to match a brute-force linear scan, with distance ties
    broken by ascending record id.
    """

    def __init__(self, ids: list[str], xy: np.ndarray):
        if len(ids) == 0:
            raise ValueError("cannot build a spatial index from zero records")
        if len(ids) != len(set(ids)):
            raise ValueError("record ids must be unique")
        self._ids = tuple(ids)
        self._xy = np.asarray(xy, dtype=np.float64)
        self._row = {rid: i for i, rid in enumerate(self._ids)}
        self._tree = cKDTree(self._xy)

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    def coords(self, record_id: str) -> tuple[float, float]:
        row = self._require(record_id)
        return float(self._xy[row, 0]), float(self._xy[row, 1])

    def _require(self, record_id: str) -> int:
        try:
            return self._row[record_id]
        except KeyError:
            raise KeyError(f"record id {record_id!r} not in index") from None

    def knn(self, query_id: str, k: int, d: float) -> list[tuple[str, float]]:
        """Up to ``k`` nearest other records within distance ``d``.

        Returns (record_id, distance) pairs with ascending distance; ties
        broken by ascending record id. May return fewer than ``k`` entries,
        including none.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if d <= 0:
            raise ValueError("d must be > 0")
        row = self._require(query_id)
        point = self._xy[row]
        candidates = self._tree.query_ball_point(point, r=d)
        out = []
        for cand in candidates:
            if cand == row:
                continue
            dist = float(np.hypot(*(self._xy[cand] - point)))
            out.append((dist, self._ids[cand], cand))
        out.sort(key=lambda t: (t[0], t[1]))
        return [(rid, dist) for dist, rid, _ in out[:k]]


def build_index(records) -> SpatialIndex:
    """Index a list of records carrying ``id`` and ``proj`` attributes."""
    ids = [r.id for r in records]
    xy = np.array([(r.proj.x, r.proj.y) for r in records], dtype=np.float64)
    return SpatialIndex(ids, xy)


@dataclass
class NeighborTable:
    """Cached spatial neighbors per record id.

    Each row holds up to K (neighbor id, distance) pairs with ascending
    distance, all within the caching distance. Records whose row is empty
    had no other record in range.
    """

    rows: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def neighborless_ids(self) -> list[str]:
        return [rid for rid, row in self.rows.items() if not row]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def dbscan_dedupe(records, eps: float = 10.0) -> list[str]:
    """Collapse density-connected groups of points to one representative.

    Density clusters are the connected components of the "within eps"
    graph (DBSCAN with minimum cluster size 1, so isolated points survive
    as their own cluster). From each cluster the member nearest the
    cluster centroid is kept; ties go to the earliest input position.
    Returned ids follow the input order.
    """
    if len(records) == 0:
        return []
    ids = [r.id for r in records]
    xy = np.array([(r.proj.x, r.proj.y) for r in records], dtype=np.float64)
    tree = cKDTree(xy)
    uf = _UnionFind(len(records))
    for a, b in tree.query_pairs(r=eps):
        uf.union(a, b)

    clusters: dict[int, list[int]] = {}
    for i in range(len(records)):
        clusters.setdefault(uf.find(i), []).append(i)

    kept: list[int] = []
    for members in clusters.values():
        centroid = xy[members].mean(axis=0)
        dists = np.hypot(*(xy[members] - centroid).T)
        kept.append(members[int(np.argmin(dists))])
    kept.sort()
    return [ids[i] for i in kept]
