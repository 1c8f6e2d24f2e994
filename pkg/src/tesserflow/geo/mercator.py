"""Integer Mercator grid and Morton (z-order) codes.

Locations are projected onto a square 2^31 x 2^31 grid (Web Mercator,
31 bits per axis; one grid unit is about 1.87 cm at the equator).  Grid
points interleave into 62-bit Morton codes, which are the key currency
of the location index and of area-tree cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from tesserflow.errors import TesserflowError

GRID_BITS = 31
GRID_SIZE = 1 << GRID_BITS  # 2_147_483_648 units per axis

# Latitude bound of the square Mercator domain: atan(sinh(pi)).
MAX_LAT = 85.05113

EARTH_RADIUS_M = 6371008.8
EARTH_CIRCUMFERENCE_M = 2.0 * math.pi * EARTH_RADIUS_M


class OutOfBand(TesserflowError):
    """Latitude outside the indexable Mercator band."""


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """Latitude/longitude in degrees; lng normalized to [-180, 180)."""

    lat: float
    lng: float

    def __post_init__(self):
        lng = self.lng
        if not (-180.0 <= lng < 180.0):
            lng = math.fmod(lng + 180.0, 360.0)
            if lng < 0.0:
                lng += 360.0
            object.__setattr__(self, "lng", lng - 180.0)


@dataclass(frozen=True, slots=True)
class GridPoint:
    """Unsigned 31-bit grid coordinates; y grows southward."""

    x: int
    y: int

    def __post_init__(self):
        if not (0 <= self.x < GRID_SIZE and 0 <= self.y < GRID_SIZE):
            raise ValueError(f"grid point out of range: ({self.x}, {self.y})")


def project(p: GeoPoint) -> GridPoint:
    """Project a GeoPoint onto the integer Mercator grid."""
    if abs(p.lat) > MAX_LAT:
        raise OutOfBand(f"latitude {p.lat} outside +/-{MAX_LAT}")
    x = int((p.lng + 180.0) / 360.0 * GRID_SIZE)
    lat_rad = math.radians(p.lat)
    y = int((1.0 - math.asinh(math.tan(lat_rad)) / math.pi) / 2.0 * GRID_SIZE)
    # floor can land exactly on the east/south edge; fold it back in.
    x = min(max(x, 0), GRID_SIZE - 1)
    y = min(max(y, 0), GRID_SIZE - 1)
    return GridPoint(x, y)


def unproject(g: GridPoint) -> GeoPoint:
    """Inverse projection, evaluated at the grid point's min corner."""
    lng = g.x / GRID_SIZE * 360.0 - 180.0
    merc = math.pi * (1.0 - 2.0 * g.y / GRID_SIZE)
    lat = math.degrees(math.atan(math.sinh(merc)))
    return GeoPoint(lat, lng)


def meters_per_grid_unit(lat: float) -> float:
    """Ground size of one grid unit at the given latitude."""
    return math.cos(math.radians(lat)) * EARTH_CIRCUMFERENCE_M / GRID_SIZE


_EVEN_MASKS = (
    (1, 0x5555555555555555),
    (2, 0x3333333333333333),
    (4, 0x0F0F0F0F0F0F0F0F),
    (8, 0x00FF00FF00FF00FF),
    (16, 0x0000FFFF0000FFFF),
    (32, 0x00000000FFFFFFFF),
)


def _spread(v: int) -> int:
    # 31-bit value -> its bits at the even positions of a 62-bit word.
    for shift, mask in reversed(_EVEN_MASKS[:-1]):
        v = (v | (v << shift)) & mask
    return v


def _compact(v: int) -> int:
    v &= _EVEN_MASKS[0][1]
    for shift, mask in _EVEN_MASKS[1:]:
        v = (v | (v >> (shift // 2))) & mask
    return v


def morton_encode(g: GridPoint) -> int:
    """Interleave x (even bits) and y (odd bits) into a 62-bit code."""
    return _spread(g.x) | (_spread(g.y) << 1)


def morton_decode(code: int) -> GridPoint:
    return GridPoint(_compact(code), _compact(code >> 1))


MORTON_BITS = 2 * GRID_BITS  # 62
MORTON_SPACE = 1 << MORTON_BITS


@dataclass(frozen=True, slots=True)
class CellId:
    """A 64-way-tree cell: 6 Morton bits per level.

    A cell at level L spans 2^(31-3L) grid units per axis; its Morton
    codes form the contiguous range [code, code + 2^(62-6L)).  Cells
    are half-open per axis: [min, min + span).
    """

    level: int
    code: int

    def __post_init__(self):
        if not (0 <= self.level <= 10):
            raise ValueError(f"cell level {self.level} outside 0..10")
        if self.code & (self.code_span() - 1):
            raise ValueError("cell code not aligned to its level")

    def code_span(self) -> int:
        return 1 << (MORTON_BITS - 6 * self.level)

    def grid_span(self) -> int:
        return 1 << (GRID_BITS - 3 * self.level)

    def min_corner(self) -> GridPoint:
        return morton_decode(self.code)

    def children(self) -> list["CellId"]:
        span = 1 << (MORTON_BITS - 6 * (self.level + 1))
        return [CellId(self.level + 1, self.code + i * span) for i in range(64)]

    def child(self, digit: int) -> "CellId":
        span = 1 << (MORTON_BITS - 6 * (self.level + 1))
        return CellId(self.level + 1, self.code + digit * span)

    def contains_code(self, code: int) -> bool:
        return self.code <= code < self.code + self.code_span()


def cell_of(g: GridPoint, level: int) -> CellId:
    """The level-L cell containing a grid point."""
    code = morton_encode(g)
    span = 1 << (MORTON_BITS - 6 * level)
    return CellId(level, code & ~(span - 1))


def cell_digit(code: int, depth: int) -> int:
    """The 6-bit child digit at a given depth (0 = root's children)."""
    return (code >> (MORTON_BITS - 6 * (depth + 1))) & 63
