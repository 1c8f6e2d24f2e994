"""Projection, Morton codes, and cell ids.

Expected grid coordinates below were computed from the closed-form
projection with 50-digit arithmetic (mpmath) and frozen here; the
Morton codes come from a separate bit-by-bit interleave.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tesserflow.geo.mercator import (
    GRID_SIZE,
    MAX_LAT,
    CellId,
    GeoPoint,
    GridPoint,
    OutOfBand,
    cell_digit,
    cell_of,
    meters_per_grid_unit,
    morton_decode,
    morton_encode,
    project,
    unproject,
)

# (lat, lng) -> (x, y, morton)
FROZEN = [
    ((37.7749, -122.4194), (343481658, 830047391, 797770192920872942)),
    ((51.5074, -0.1278), (1072979467, 714093122, 999191156524589133)),
    ((-33.8688, 151.2093), (1975740432, 1288688297, 3869138192356116866)),
]


@pytest.mark.parametrize("ll,expected", FROZEN)
def test_project_frozen(ll, expected):
    g = project(GeoPoint(*ll))
    assert (g.x, g.y) == expected[:2]
    assert morton_encode(g) == expected[2]


def test_cell_of_frozen():
    g = project(GeoPoint(37.7749, -122.4194))
    c = cell_of(g, 8)
    # level 8 keeps the top 48 Morton bits
    assert c.code == 797770192920872942 >> 14 << 14
    assert c.contains_code(morton_encode(g))


def test_band_edges_clamp():
    assert project(GeoPoint(MAX_LAT, 0.0)).y == 0
    assert project(GeoPoint(-MAX_LAT, 0.0)).y == GRID_SIZE - 1
    with pytest.raises(OutOfBand):
        project(GeoPoint(85.06, 0.0))
    with pytest.raises(OutOfBand):
        project(GeoPoint(-90.0, 0.0))


def test_lng_normalization():
    assert project(GeoPoint(10.0, 190.0)) == project(GeoPoint(10.0, -170.0))
    assert project(GeoPoint(10.0, -180.0)).x == 0
    # +180 wraps to -180
    assert project(GeoPoint(10.0, 180.0)).x == 0


def test_grid_unit_is_centimeter_scale():
    m = meters_per_grid_unit(0.0)
    assert m == pytest.approx(0.0186405279134, rel=1e-9)
    assert meters_per_grid_unit(60.0) == pytest.approx(m * math.cos(math.radians(60.0)), rel=1e-12)


# the outermost ~1.3e-6 degrees of the band clamp onto the boundary
# grid row (85.05113 lies just past atan(sinh(pi))), so the roundtrip
# bound is asserted on the unclamped interior
finite_lat = st.floats(min_value=-85.05112, max_value=85.05112, allow_nan=False)
finite_lng = st.floats(min_value=-180.0, max_value=179.9999999, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(finite_lat, finite_lng)
def test_roundtrip_error_bound(lat, lng):
    p = GeoPoint(lat, lng)
    q = unproject(project(p))
    assert abs(q.lng - p.lng) <= 2.5e-7
    assert abs(q.lat - p.lat) <= 2.5e-7


@settings(max_examples=300, deadline=None)
@given(st.integers(0, GRID_SIZE - 1), st.integers(0, GRID_SIZE - 1))
def test_morton_bijective(x, y):
    g = GridPoint(x, y)
    assert morton_decode(morton_encode(g)) == g


def test_morton_small_example():
    # x=3 (binary 11) on even bits, y=5 (binary 101) on odd bits -> 100111
    assert morton_encode(GridPoint(3, 5)) == 0b100111


def test_cellid_validation():
    with pytest.raises(ValueError):
        CellId(11, 0)
    with pytest.raises(ValueError):
        CellId(1, 3)  # not aligned to 2**56
    c = CellId(1, 3 << 56)
    assert c.grid_span() == 1 << 28
    assert c.code_span() == 1 << 56


def test_children_partition_parent():
    c = CellId(2, (5 << 56))
    kids = c.children()
    assert len(kids) == 64
    lo = c.code
    for k in kids:
        assert k.level == 3
        assert k.code == lo
        lo += k.code_span()
    assert lo == c.code + c.code_span()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, GRID_SIZE - 1), st.integers(0, GRID_SIZE - 1), st.integers(0, 10))
def test_cell_of_contains_point(x, y, level):
    g = GridPoint(x, y)
    c = cell_of(g, level)
    code = morton_encode(g)
    assert c.contains_code(code)
    mc = c.min_corner()
    span = c.grid_span()
    assert mc.x <= x < mc.x + span
    assert mc.y <= y < mc.y + span


def test_cell_digit_walk_reaches_cell():
    g = project(GeoPoint(37.7749, -122.4194))
    code = morton_encode(g)
    c = cell_of(g, 6)
    acc = 0
    for depth in range(6):
        acc |= cell_digit(code, depth) << (62 - 6 * (depth + 1))
    assert acc == c.code
