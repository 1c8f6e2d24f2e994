from tesserflow.geo.mercator import (
    GRID_BITS,
    GRID_SIZE,
    MAX_LAT,
    CellId,
    GeoPoint,
    GridPoint,
    OutOfBand,
    cell_of,
    morton_decode,
    morton_encode,
    project,
    unproject,
)
from tesserflow.geo.areatree import (
    MAX_TREE_LEVEL,
    AreaTree,
    LevelMismatch,
    area_combine,
)
from tesserflow.geo.shapes import (
    DegeneratePath,
    DegenerateRing,
    LatLngRect,
    Polygon,
    Polyline,
    area_from_path,
    area_from_point_radius,
    area_from_polygon,
    area_from_rect,
)
from tesserflow.geo.cover import covering_ranges
from tesserflow.geo.geojson import area_to_geojson

__all__ = [
    "GRID_BITS",
    "GRID_SIZE",
    "MAX_LAT",
    "MAX_TREE_LEVEL",
    "AreaTree",
    "CellId",
    "DegeneratePath",
    "DegenerateRing",
    "GeoPoint",
    "GridPoint",
    "LatLngRect",
    "LevelMismatch",
    "OutOfBand",
    "Polygon",
    "Polyline",
    "area_combine",
    "area_from_path",
    "area_from_point_radius",
    "area_from_polygon",
    "area_from_rect",
    "area_to_geojson",
    "cell_of",
    "covering_ranges",
    "morton_decode",
    "morton_encode",
    "project",
    "unproject",
]
