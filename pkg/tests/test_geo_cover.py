"""Code-range covers: brute force every grid point of small rects."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tesserflow.geo.cover import covering_ranges, covering_ranges_grid
from tesserflow.geo.mercator import (
    GRID_SIZE,
    MORTON_SPACE,
    GeoPoint,
    GridPoint,
    morton_encode,
    project,
)
from tesserflow.geo.shapes import LatLngRect


def assert_well_formed(ranges, max_cells):
    assert len(ranges) <= max_cells
    prev_hi = -1
    for lo, hi in ranges:
        assert 0 <= lo < hi <= MORTON_SPACE
        assert lo > prev_hi  # sorted, disjoint, non-adjacent after merging
        prev_hi = hi


def covered(ranges, code):
    return any(lo <= code < hi for lo, hi in ranges)


def brute_check(x0, y0, x1, y1, max_cells):
    ranges = covering_ranges_grid(x0, y0, x1, y1, max_cells)
    assert_well_formed(ranges, max_cells)
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            assert covered(ranges, morton_encode(GridPoint(x, y)))
    return ranges


def test_point_rect_is_single_code():
    g = project(GeoPoint(37.7749, -122.4194))
    code = morton_encode(g)
    assert covering_ranges_grid(g.x, g.y, g.x, g.y, 8) == [(code, code + 1)]
    assert covering_ranges_grid(g.x, g.y, g.x, g.y, 1) == [(code, code + 1)]


def test_full_world_is_one_range():
    m = GRID_SIZE - 1
    assert covering_ranges_grid(0, 0, m, m, 4) == [(0, MORTON_SPACE)]


def test_small_rects_brute_force():
    brute_check(100, 200, 131, 231, 16)
    brute_check(0, 0, 7, 7, 4)
    brute_check(12345, 99999, 12345 + 40, 99999 + 3, 8)
    # aligned 8x8 block: exactly one range
    r = brute_check(64, 128, 71, 135, 16)
    assert len(r) == 1


def test_budget_of_one_still_covers():
    r = brute_check(1000, 1000, 1300, 1550, 1)
    assert len(r) == 1


def test_more_budget_is_tighter():
    def span(ranges):
        return sum(hi - lo for lo, hi in ranges)

    prev = None
    for budget in (1, 2, 4, 8, 16, 64):
        ranges = covering_ranges_grid(5000, 7000, 5400, 7777, budget)
        assert_well_formed(ranges, budget)
        s = span(ranges)
        if prev is not None:
            assert s <= prev
        prev = s


def test_deterministic():
    a = covering_ranges_grid(5000, 7000, 5400, 7777, 12)
    b = covering_ranges_grid(5000, 7000, 5400, 7777, 12)
    assert a == b


def test_latlng_rect_cover_contains_projected_points():
    rect = LatLngRect(GeoPoint(37.70, -122.52), GeoPoint(37.84, -122.35))
    ranges = covering_ranges(rect, 32)
    assert_well_formed(ranges, 32)
    for lat, lng in [(37.70, -122.52), (37.84, -122.35), (37.77, -122.44), (37.8399, -122.3501)]:
        code = morton_encode(project(GeoPoint(lat, lng)))
        assert covered(ranges, code)


def test_invalid_budget():
    with pytest.raises(ValueError):
        covering_ranges_grid(0, 0, 1, 1, 0)


def test_empty_rect():
    assert covering_ranges_grid(5, 5, 4, 9, 8) == []


coords = st.integers(0, GRID_SIZE - 1)


@settings(max_examples=80, deadline=None)
@given(coords, coords, st.integers(0, 12), st.integers(0, 12), st.integers(1, 24))
def test_cover_property(x0, y0, w, h, budget):
    x1 = min(x0 + w, GRID_SIZE - 1)
    y1 = min(y0 + h, GRID_SIZE - 1)
    ranges = covering_ranges_grid(x0, y0, x1, y1, budget)
    assert_well_formed(ranges, budget)
    # corners and center must be covered
    for x, y in [(x0, y0), (x0, y1), (x1, y0), (x1, y1), ((x0 + x1) // 2, (y0 + y1) // 2)]:
        assert covered(ranges, morton_encode(GridPoint(x, y)))
