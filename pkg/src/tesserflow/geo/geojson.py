"""GeoJSON emission for area trees and cells.

Cells are emitted as their lat/lng quads (positions are [lng, lat]),
one polygon per canonical cell, bundled into a MultiPolygon.
"""

from __future__ import annotations

import math

from tesserflow.geo.areatree import AreaTree
from tesserflow.geo.mercator import GRID_SIZE, CellId


def _unproject_raw(x: float, y: float) -> tuple:
    """Grid coords to (lng, lat); accepts the far edge x == GRID_SIZE."""
    lng = x / GRID_SIZE * 360.0 - 180.0
    merc = math.pi * (1.0 - 2.0 * y / GRID_SIZE)
    lat = math.degrees(math.atan(math.sinh(merc)))
    return (lng, lat)


def cell_ring(cell: CellId) -> list:
    """Closed counterclockwise ring of the cell's corners."""
    g = cell.min_corner()
    s = cell.grid_span()
    corners = [
        (g.x, g.y),
        (g.x, g.y + s),
        (g.x + s, g.y + s),
        (g.x + s, g.y),
        (g.x, g.y),
    ]
    return [list(_unproject_raw(x, y)) for x, y in corners]


def area_to_geojson(tree: AreaTree) -> dict:
    return {
        "type": "MultiPolygon",
        "coordinates": [[cell_ring(c)] for c in tree.cells()],
    }
