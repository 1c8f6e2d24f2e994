"""Geometric shapes and their conservative rasterization to area trees.

All rasterizers produce an outer cover: every grid point inside the
shape is in the resulting tree, plus boundary cells at max_level that
only overlap it.  Geometry is evaluated in projected (grid) space with
float coordinates, so edges are straight lines on the Mercator plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from tesserflow.errors import TesserflowError
from tesserflow.geo import areatree
from tesserflow.geo.areatree import AreaTree, DEFAULT_MAX_LEVEL
from tesserflow.geo.mercator import (
    GRID_SIZE,
    MAX_LAT,
    GeoPoint,
    OutOfBand,
    meters_per_grid_unit,
    project,
)

_METERS_PER_DEG_LAT = 111194.9  # mean meridian arc per degree


class DegenerateRing(TesserflowError):
    """Polygon ring with fewer than 3 distinct vertices."""


class DegeneratePath(TesserflowError):
    """Path with fewer than 2 points."""


def _project_f(p: GeoPoint) -> tuple:
    """Continuous grid coordinates (no flooring), for geometry tests."""
    if abs(p.lat) > MAX_LAT:
        raise OutOfBand(f"latitude {p.lat} outside +-{MAX_LAT}")
    x = (p.lng + 180.0) / 360.0 * GRID_SIZE
    y = (1.0 - math.asinh(math.tan(math.radians(p.lat))) / math.pi) / 2.0 * GRID_SIZE
    return (x, y)


@dataclass(frozen=True)
class LatLngRect:
    """Axis-aligned lat/lng box; corners must satisfy sw <= ne per axis."""

    sw: GeoPoint
    ne: GeoPoint

    def __post_init__(self):
        if self.sw.lat > self.ne.lat or self.sw.lng > self.ne.lng:
            raise ValueError("rect corners out of order (sw must be <= ne)")

    def grid_bounds(self) -> tuple:
        """Inclusive grid-point bounds (x0, y0, x1, y1); north is smaller y."""
        lo = project(self.sw)
        hi = project(self.ne)
        return (lo.x, hi.y, hi.x, lo.y)

    def contains_grid(self, x: int, y: int) -> bool:
        x0, y0, x1, y1 = self.grid_bounds()
        return x0 <= x <= x1 and y0 <= y <= y1


class Polygon:
    """One or more rings of vertices; interior decided by even-odd rule."""

    __slots__ = ("rings",)

    def __init__(self, rings: Sequence[Sequence[GeoPoint]]):
        if not rings:
            raise DegenerateRing("polygon needs at least one ring")
        closed = []
        for ring in rings:
            pts = list(ring)
            if pts and pts[0] == pts[-1]:
                pts = pts[:-1]
            if len({(p.lat, p.lng) for p in pts}) < 3:
                raise DegenerateRing("ring needs at least 3 distinct vertices")
            closed.append(pts)
        self.rings = closed


class Polyline:
    """Open chain of points; consecutive duplicates are allowed."""

    __slots__ = ("points",)

    def __init__(self, points: Sequence[GeoPoint]):
        pts = list(points)
        if len(pts) < 2:
            raise DegeneratePath("path needs at least 2 points")
        self.points = pts


# --- classifier helpers (grid space, cell = [x0, x0+s) x [y0, y0+s)) ---


def _seg_intersects_rect(ax, ay, bx, by, x0, y0, x1, y1) -> bool:
    """Closed-rect vs segment overlap test (Liang-Barsky clip)."""
    dx = bx - ax
    dy = by - ay
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, ax - x0),
        (dx, x1 - ax),
        (-dy, ay - y0),
        (dy, y1 - ay),
    ):
        if p == 0.0:
            if q < 0.0:
                return False
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return False
            if r > t0:
                t0 = r
        else:
            if r < t0:
                return False
            if r < t1:
                t1 = r
    return True


def _point_in_rings(x, y, rings) -> bool:
    """Even-odd crossing test against projected rings."""
    inside = False
    for ring in rings:
        n = len(ring)
        for i in range(n):
            ax, ay = ring[i]
            bx, by = ring[(i + 1) % n]
            if (ay > y) != (by > y):
                t = (y - ay) / (by - ay)
                if x < ax + t * (bx - ax):
                    inside = not inside
    return inside


def _dist2_point_seg(px, py, ax, ay, bx, by) -> float:
    dx = bx - ax
    dy = by - ay
    d2 = dx * dx + dy * dy
    if d2 == 0.0:
        ex, ey = px - ax, py - ay
        return ex * ex + ey * ey
    t = ((px - ax) * dx + (py - ay) * dy) / d2
    t = min(1.0, max(0.0, t))
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return ex * ex + ey * ey


def _dist2_seg_seg(ax, ay, bx, by, cx, cy, dx, dy) -> float:
    if _segments_cross(ax, ay, bx, by, cx, cy, dx, dy):
        return 0.0
    return min(
        _dist2_point_seg(ax, ay, cx, cy, dx, dy),
        _dist2_point_seg(bx, by, cx, cy, dx, dy),
        _dist2_point_seg(cx, cy, ax, ay, bx, by),
        _dist2_point_seg(dx, dy, ax, ay, bx, by),
    )


def _segments_cross(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    def orient(ox, oy, px, py, qx, qy):
        v = (px - ox) * (qy - oy) - (py - oy) * (qx - ox)
        return (v > 0) - (v < 0)

    o1 = orient(ax, ay, bx, by, cx, cy)
    o2 = orient(ax, ay, bx, by, dx, dy)
    o3 = orient(cx, cy, dx, dy, ax, ay)
    o4 = orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return True
    return False


def _rect_min_dist2_seg(x0, y0, x1, y1, ax, ay, bx, by) -> float:
    if _seg_intersects_rect(ax, ay, bx, by, x0, y0, x1, y1):
        return 0.0
    edges = (
        (x0, y0, x1, y0),
        (x1, y0, x1, y1),
        (x1, y1, x0, y1),
        (x0, y1, x0, y0),
    )
    return min(_dist2_seg_seg(ax, ay, bx, by, *e) for e in edges)


def _rect_max_dist2_point(x0, y0, x1, y1, px, py) -> float:
    mx = max((px - x0) ** 2, (px - x1) ** 2)
    my = max((py - y0) ** 2, (py - y1) ** 2)
    return mx + my


# --- rasterizers ---


def area_from_rect(rect: LatLngRect, max_level: int = DEFAULT_MAX_LEVEL) -> AreaTree:
    x0, y0, x1, y1 = rect.grid_bounds()

    def classify(cx, cy, span):
        cx1, cy1 = cx + span - 1, cy + span - 1
        if cx1 < x0 or cx > x1 or cy1 < y0 or cy > y1:
            return areatree.OUTSIDE
        if x0 <= cx and cx1 <= x1 and y0 <= cy and cy1 <= y1:
            return areatree.INSIDE
        return areatree.OVERLAP

    return areatree.build_from_classifier(classify, max_level)


def area_from_polygon(poly: Polygon, max_level: int = DEFAULT_MAX_LEVEL) -> AreaTree:
    rings = [[_project_f(p) for p in ring] for ring in poly.rings]
    edges = []
    for ring in rings:
        n = len(ring)
        for i in range(n):
            ax, ay = ring[i]
            bx, by = ring[(i + 1) % n]
            if (ax, ay) != (bx, by):
                edges.append((ax, ay, bx, by))

    def classify(cx, cy, span):
        x1, y1 = cx + span, cy + span
        for ax, ay, bx, by in edges:
            if _seg_intersects_rect(ax, ay, bx, by, cx, cy, x1, y1):
                return areatree.OVERLAP
        # no edge crosses: uniformly in or out; test the center
        mx, my = cx + span / 2.0, cy + span / 2.0
        return areatree.INSIDE if _point_in_rings(mx, my, rings) else areatree.OUTSIDE

    return areatree.build_from_classifier(classify, max_level)


def _conservative_grid_radius(radius_m: float, lats) -> float:
    """Radius in grid units, using the latitude extreme of the shape
    pushed outward by the radius itself, so true ground distance is
    never underestimated anywhere the shape can reach."""
    pad_deg = radius_m / _METERS_PER_DEG_LAT
    extreme = min(MAX_LAT, max(abs(lat) for lat in lats) + pad_deg)
    return radius_m / meters_per_grid_unit(extreme)


def area_from_point_radius(
    center: GeoPoint, radius_m: float, max_level: int = DEFAULT_MAX_LEVEL
) -> AreaTree:
    if radius_m < 0:
        raise ValueError("radius_m must be >= 0")
    px, py = _project_f(center)
    r = _conservative_grid_radius(radius_m, [center.lat])
    r2 = r * r

    def classify(cx, cy, span):
        x1, y1 = cx + span, cy + span
        qx = min(max(px, cx), x1)
        qy = min(max(py, cy), y1)
        dmin2 = (px - qx) ** 2 + (py - qy) ** 2
        if dmin2 > r2:
            return areatree.OUTSIDE
        if _rect_max_dist2_point(cx, cy, x1, y1, px, py) <= r2:
            return areatree.INSIDE
        return areatree.OVERLAP

    return areatree.build_from_classifier(classify, max_level)


def area_from_path(
    path: Polyline, width_m: float, max_level: int = DEFAULT_MAX_LEVEL
) -> AreaTree:
    """Buffer a path into a strip of total width width_m (capsule per
    segment, radius width_m / 2)."""
    if width_m <= 0:
        raise ValueError("width_m must be > 0")
    pts = [_project_f(p) for p in path.points]
    r = _conservative_grid_radius(width_m / 2.0, [p.lat for p in path.points])
    r2 = r * r
    segs = []
    for i in range(len(pts) - 1):
        (ax, ay), (bx, by) = pts[i], pts[i + 1]
        segs.append((ax, ay, bx, by))

    def classify(cx, cy, span):
        x1, y1 = cx + span, cy + span
        hit = False
        for ax, ay, bx, by in segs:
            if _rect_min_dist2_seg(cx, cy, x1, y1, ax, ay, bx, by) <= r2:
                hit = True
                # capsules are convex, so the rect is inside one iff all
                # four corners are within r of its segment
                if all(
                    _dist2_point_seg(qx, qy, ax, ay, bx, by) <= r2
                    for qx, qy in ((cx, cy), (x1, cy), (cx, y1), (x1, y1))
                ):
                    return areatree.INSIDE
        return areatree.OVERLAP if hit else areatree.OUTSIDE

    return areatree.build_from_classifier(classify, max_level)
