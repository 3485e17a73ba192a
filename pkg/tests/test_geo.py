import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streetclust.geo import (
    EARTH_RADIUS_M,
    GeoPoint,
    ProjectedPoint,
    build_index,
    dbscan_dedupe,
    project,
    unproject,
)

from oracles import knn_scan


class Rec:
    """Minimal stand-in carrying just id/proj, as build_index requires."""

    def __init__(self, rid, x, y):
        self.id = rid
        self.proj = ProjectedPoint(x, y)


def make_records(xy):
    return [Rec(f"r{i:04d}", x, y) for i, (x, y) in enumerate(xy)]


# ---------------------------------------------------------------- projection


def test_project_origin_is_fixed_point():
    p = project(GeoPoint(0.0, 0.0))
    assert p.x == 0.0
    assert p.y == 0.0


def test_project_one_degree_east():
    # closed form: x = R * pi / 180
    p = project(GeoPoint(1.0, 0.0))
    assert p.x == pytest.approx(EARTH_RADIUS_M * math.pi / 180.0, abs=1e-6)
    assert p.x == pytest.approx(111319.4908, abs=1e-4)
    assert p.y == pytest.approx(0.0, abs=1e-9)


def test_project_antimeridian():
    p = project(GeoPoint(180.0, 0.0))
    assert p.x == pytest.approx(EARTH_RADIUS_M * math.pi, abs=1e-6)
    assert p.x == pytest.approx(20037508.3428, abs=1e-4)


@pytest.mark.parametrize("lat", [85.06, -85.06, 90.0, -90.0])
def test_out_of_range_latitude_rejected(lat):
    with pytest.raises(ValueError):
        GeoPoint(0.0, lat)


def test_round_trip_10k_random_points():
    rng = np.random.default_rng(7)
    lons = rng.uniform(-180.0, 180.0, size=10_000)
    lats = rng.uniform(-85.0, 85.0, size=10_000)
    worst = 0.0
    for lon, lat in zip(lons, lats):
        q = unproject(project(GeoPoint(lon, lat)))
        worst = max(worst, abs(q.lon - lon), abs(q.lat - lat))
    assert worst < 1e-6


@given(
    st.floats(min_value=-180.0, max_value=180.0),
    st.floats(min_value=-85.0, max_value=85.0),
)
@settings(max_examples=200, deadline=None)
def test_round_trip_property(lon, lat):
    q = unproject(project(GeoPoint(lon, lat)))
    assert abs(q.lon - lon) < 1e-6
    assert abs(q.lat - lat) < 1e-6


# -------------------------------------------------------------------- index


def test_index_rejects_empty():
    with pytest.raises(ValueError):
        build_index([])


def test_singleton_index_has_empty_knn():
    idx = build_index([Rec("only", 0.0, 0.0)])
    assert idx.knn("only", k=5, d=1000.0) == []


def test_collinear_ordering():
    recs = make_records([(0.0, 0.0), (10.0, 0.0), (30.0, 0.0)])
    idx = build_index(recs)
    row = idx.knn("r0001", k=2, d=100.0)
    assert [rid for rid, _ in row] == ["r0000", "r0002"]
    assert [d for _, d in row] == pytest.approx([10.0, 20.0])


def test_knn_single_candidate_in_range():
    recs = make_records([(0.0, 0.0), (10.0, 0.0), (30.0, 0.0)])
    idx = build_index(recs)
    assert idx.knn("r0000", k=1, d=15.0) == [("r0001", pytest.approx(10.0))]


def test_knn_empty_when_nothing_within_d():
    recs = make_records([(0.0, 0.0), (10.0, 0.0), (30.0, 0.0)])
    idx = build_index(recs)
    assert idx.knn("r0000", k=1, d=5.0) == []


def test_knn_unknown_id_raises():
    idx = build_index(make_records([(0.0, 0.0), (1.0, 1.0)]))
    with pytest.raises(KeyError):
        idx.knn("nope", k=1, d=10.0)


def test_knn_matches_brute_force_scan():
    rng = np.random.default_rng(123)
    xy = rng.uniform(0.0, 1000.0, size=(500, 2))
    recs = make_records(xy)
    idx = build_index(recs)
    ids = [r.id for r in recs]
    coords = [(r.proj.x, r.proj.y) for r in recs]
    for qi in range(len(recs)):
        got = idx.knn(ids[qi], k=3, d=200.0)
        want = knn_scan(coords, ids, qi, k=3, d=200.0)
        assert [r for r, _ in got] == [r for r, _ in want]
        assert [d for _, d in got] == pytest.approx([d for _, d in want])


def test_knn_distance_ties_broken_by_id():
    # Four points equidistant from the query; ids decide the order.
    recs = [
        Rec("q", 0.0, 0.0),
        Rec("d", 5.0, 0.0),
        Rec("b", -5.0, 0.0),
        Rec("c", 0.0, 5.0),
        Rec("a", 0.0, -5.0),
    ]
    idx = build_index(recs)
    row = idx.knn("q", k=3, d=10.0)
    assert [rid for rid, _ in row] == ["a", "b", "c"]


def test_build_index_deterministic():
    rng = np.random.default_rng(5)
    xy = rng.uniform(0.0, 500.0, size=(200, 2))
    a = build_index(make_records(xy))
    b = build_index(make_records(xy))
    for rid in a.ids:
        assert a.knn(rid, k=4, d=100.0) == b.knn(rid, k=4, d=100.0)


# ------------------------------------------------------------------- dedupe


def test_dedupe_collapses_sub_eps_pair():
    recs = make_records([(0.0, 0.0), (5.0, 0.0)])
    kept = dbscan_dedupe(recs, eps=10.0)
    assert len(kept) == 1


def test_dedupe_keeps_separated_points():
    recs = make_records([(0.0, 0.0), (20.0, 0.0), (40.0, 40.0)])
    assert dbscan_dedupe(recs, eps=10.0) == ["r0000", "r0001", "r0002"]


def test_dedupe_chain_keeps_member_nearest_centroid():
    # 0-8-16 m chain is density-connected at eps=10; centroid is at 8 m.
    recs = make_records([(0.0, 0.0), (8.0, 0.0), (16.0, 0.0)])
    assert dbscan_dedupe(recs, eps=10.0) == ["r0001"]


def test_dedupe_empty_input():
    assert dbscan_dedupe([], eps=10.0) == []


def test_dedupe_kept_points_not_density_connected():
    rng = np.random.default_rng(99)
    xy = rng.uniform(0.0, 200.0, size=(300, 2))
    recs = make_records(xy)
    kept = set(dbscan_dedupe(recs, eps=10.0))
    assert kept <= {r.id for r in recs}
    kept_xy = np.array([(r.proj.x, r.proj.y) for r in recs if r.id in kept])
    diff = kept_xy[:, None, :] - kept_xy[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    assert dist.min() > 10.0


def test_dedupe_output_follows_input_order():
    recs = make_records([(100.0, 0.0), (0.0, 0.0), (50.0, 0.0)])
    kept = dbscan_dedupe(recs, eps=10.0)
    assert kept == ["r0000", "r0001", "r0002"]
