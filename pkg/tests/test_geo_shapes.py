"""Shape rasterizers checked against shapely in projected grid space.

The covers are conservative (outer), so the contract is two-sided:
every point of the shape lands in the tree, and every emitted cell
actually touches the shape.
"""

import math
import random

import pytest
import shapely.geometry as sg

from tesserflow.geo.areatree import AreaTree
from tesserflow.geo.mercator import GeoPoint, meters_per_grid_unit, project
from tesserflow.geo.shapes import (
    DegeneratePath,
    DegenerateRing,
    LatLngRect,
    Polygon,
    Polyline,
    _project_f,
    area_from_path,
    area_from_point_radius,
    area_from_polygon,
    area_from_rect,
)

LEVEL = 6  # keeps rasterization fast; cells are ~2300 grid units wide


def cell_boxes(tree: AreaTree):
    for cell in tree.cells():
        mc = cell.min_corner()
        s = cell.grid_span()
        yield sg.box(mc.x, mc.y, mc.x + s, mc.y + s)


SF_RING = [
    GeoPoint(37.708, -122.514),
    GeoPoint(37.708, -122.357),
    GeoPoint(37.833, -122.357),
    GeoPoint(37.833, -122.514),
]


def test_polygon_cover_two_sided():
    poly = Polygon([SF_RING])
    tree = area_from_polygon(poly, LEVEL)
    ring_xy = [_project_f(p) for p in poly.rings[0]]
    spoly = sg.Polygon(ring_xy)
    for box in cell_boxes(tree):
        assert box.distance(spoly) == 0.0, "cell does not touch polygon"
    rng = random.Random(5)
    for _ in range(300):
        lat = rng.uniform(37.70, 37.84)
        lng = rng.uniform(-122.52, -122.35)
        x, y = _project_f(GeoPoint(lat, lng))
        inside = spoly.contains(sg.Point(x, y))
        if inside and spoly.exterior.distance(sg.Point(x, y)) > 1.0:
            assert tree.contains(project(GeoPoint(lat, lng)))


def test_polygon_with_hole():
    outer = SF_RING
    inner = [
        GeoPoint(37.75, -122.46),
        GeoPoint(37.75, -122.42),
        GeoPoint(37.79, -122.42),
        GeoPoint(37.79, -122.46),
    ]
    tree = area_from_polygon(Polygon([outer, inner]), LEVEL)
    # even-odd rule: the inner ring is a hole
    assert not tree.contains(project(GeoPoint(37.77, -122.44)))
    assert tree.contains(project(GeoPoint(37.72, -122.50)))


def test_concave_polygon():
    ring = [
        GeoPoint(37.70, -122.50),
        GeoPoint(37.70, -122.38),
        GeoPoint(37.82, -122.38),
        GeoPoint(37.82, -122.44),
        GeoPoint(37.74, -122.44),  # notch
        GeoPoint(37.74, -122.50),
    ]
    tree = area_from_polygon(Polygon([ring]), LEVEL)
    assert tree.contains(project(GeoPoint(37.72, -122.47)))
    assert tree.contains(project(GeoPoint(37.78, -122.40)))
    assert not tree.contains(project(GeoPoint(37.80, -122.48)))  # inside the notch


def test_circle_cover_two_sided():
    center = GeoPoint(37.7749, -122.4194)
    radius = 900.0
    tree = area_from_point_radius(center, radius, LEVEL)
    cx, cy = _project_f(center)
    # the cover may inflate the radius, but never beyond the ratio of
    # grid scale between the center and the padded extreme latitude
    r_lo = radius / meters_per_grid_unit(center.lat)
    pad = radius / 111194.9
    r_hi = radius / meters_per_grid_unit(abs(center.lat) + pad)
    pt = sg.Point(cx, cy)
    for box in cell_boxes(tree):
        assert box.distance(pt) <= r_hi + 1e-6
    rng = random.Random(9)
    hits = 0
    for _ in range(300):
        ang = rng.uniform(0, 2 * math.pi)
        rad = rng.uniform(0, r_lo * 0.999)
        x = cx + rad * math.cos(ang)
        y = cy + rad * math.sin(ang)
        from tesserflow.geo.mercator import GridPoint

        assert tree.contains(GridPoint(int(x), int(y)))
        hits += 1
    assert hits == 300


def test_zero_radius_circle_is_point_cover():
    center = GeoPoint(37.7749, -122.4194)
    tree = area_from_point_radius(center, 0.0, 8)
    assert tree.contains(project(center))
    assert tree.cell_count() <= 4


def test_path_cover_two_sided():
    pts = [
        GeoPoint(37.76, -122.45),
        GeoPoint(37.77, -122.43),
        GeoPoint(37.785, -122.425),
    ]
    width = 120.0
    tree = area_from_path(Polyline(pts), width, LEVEL)
    line = sg.LineString([_project_f(p) for p in pts])
    r_lo = (width / 2) / meters_per_grid_unit(37.8)
    r_hi = (width / 2) / meters_per_grid_unit(85.0)
    for box in cell_boxes(tree):
        assert box.distance(line) <= r_hi + 1e-6
    # points near the centerline are covered
    rng = random.Random(3)
    for _ in range(200):
        t = rng.random()
        p = line.interpolate(t, normalized=True)
        from tesserflow.geo.mercator import GridPoint

        assert tree.contains(GridPoint(int(p.x), int(p.y)))
    assert r_lo < r_hi  # sanity on the conservative bound itself


def test_path_with_duplicate_points():
    pts = [GeoPoint(37.76, -122.45), GeoPoint(37.76, -122.45), GeoPoint(37.77, -122.43)]
    tree = area_from_path(Polyline(pts), 50.0, LEVEL)
    assert tree.contains(project(GeoPoint(37.76, -122.45)))


def test_rect_cover():
    rect = LatLngRect(GeoPoint(37.72, -122.49), GeoPoint(37.80, -122.40))
    tree = area_from_rect(rect, LEVEL)
    rng = random.Random(1)
    for _ in range(300):
        lat = rng.uniform(37.70, 37.82)
        lng = rng.uniform(-122.51, -122.38)
        g = project(GeoPoint(lat, lng))
        if rect.contains_grid(g.x, g.y):
            assert tree.contains(g)
    x0, y0, x1, y1 = rect.grid_bounds()
    qbox = sg.box(x0, y0, x1 + 1, y1 + 1)
    for box in cell_boxes(tree):
        assert box.intersects(qbox)


def test_rect_validation():
    with pytest.raises(ValueError):
        LatLngRect(GeoPoint(37.8, -122.4), GeoPoint(37.7, -122.5))


def test_degenerate_shapes():
    with pytest.raises(DegenerateRing):
        Polygon([])
    with pytest.raises(DegenerateRing):
        Polygon([[GeoPoint(1, 1), GeoPoint(1, 1), GeoPoint(2, 2)]])
    with pytest.raises(DegeneratePath):
        Polyline([GeoPoint(0, 0)])
    with pytest.raises(ValueError):
        area_from_point_radius(GeoPoint(0, 0), -1.0)
    with pytest.raises(ValueError):
        area_from_path(Polyline([GeoPoint(0, 0), GeoPoint(1, 1)]), 0.0)


def test_closed_ring_accepted():
    ring = SF_RING + [SF_RING[0]]
    tree = area_from_polygon(Polygon([ring]), 4)
    assert not tree.is_empty()
