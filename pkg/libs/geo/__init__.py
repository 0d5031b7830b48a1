"""Tile geometry, region boundaries and raster preprocessing."""

from .boundaries import PolygonPart, RegionBoundary, region_tiles, square_boundary
from .raster import (
    RasterAnchor,
    RasterImage,
    RegionMask,
    apply_mask,
    crop,
    pixel_window,
    rasterize_mask,
    stitch,
)
from .tilegrid import (
    MAX_LATITUDE,
    TILE_SIZE,
    GeoPoint,
    TileBBox,
    TileCoord,
    lonlat_to_pixel,
    lonlat_to_tile,
    pixel_to_lonlat,
    tile_bounds,
    tile_to_lonlat,
)
from .tilestore import TileStore

__all__ = [
    "GeoPoint",
    "TileCoord",
    "TileBBox",
    "RegionBoundary",
    "PolygonPart",
    "RasterAnchor",
    "RasterImage",
    "RegionMask",
    "TileStore",
    "TILE_SIZE",
    "MAX_LATITUDE",
    "lonlat_to_tile",
    "lonlat_to_pixel",
    "pixel_to_lonlat",
    "tile_to_lonlat",
    "tile_bounds",
    "region_tiles",
    "square_boundary",
    "stitch",
    "crop",
    "pixel_window",
    "rasterize_mask",
    "apply_mask",
]
