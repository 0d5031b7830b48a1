import math

import numpy as np
import pytest

from libs.errors import DomainError
from libs.geo.boundaries import RegionBoundary, region_tiles, square_boundary
from libs.geo.tilegrid import (
    MAX_LATITUDE,
    TILE_SIZE,
    GeoPoint,
    TileBBox,
    TileCoord,
    lonlat_to_pixel,
    lonlat_to_tile,
    pixel_to_lonlat,
    tile_bounds,
)


def _tile_point(tx: float, ty: float, z: int = 10) -> GeoPoint:
    """Point at fractional tile coordinates (tx, ty)."""
    return pixel_to_lonlat(tx * TILE_SIZE, ty * TILE_SIZE, z)


def _tile_ring(x0: float, y0: float, x1: float, y1: float, z: int = 10) -> tuple[GeoPoint, ...]:
    corners = [_tile_point(x0, y1, z), _tile_point(x1, y1, z), _tile_point(x1, y0, z), _tile_point(x0, y0, z)]
    return (*corners, corners[0])


def test_lonlat_to_tile_origin():
    """The equator/meridian point falls in tile (1, 1) at zoom 1."""
    assert lonlat_to_tile(GeoPoint(lon=0.0, lat=0.0), 1) == TileCoord(1, 1, 1)


def test_lonlat_to_tile_north_west_corner():
    """The north-west corner of the world maps to the first tile."""
    assert lonlat_to_tile(GeoPoint(lon=-180.0, lat=85.0511), 0) == TileCoord(0, 0, 0)
    assert lonlat_to_tile(GeoPoint(lon=-179.999, lat=85.05), 3) == TileCoord(3, 0, 0)


def test_geopoint_rejects_polar_latitude():
    """Latitudes outside the Mercator band are a domain error."""
    with pytest.raises(DomainError):
        GeoPoint(lon=0.0, lat=89.0)


def test_geopoint_normalizes_longitude():
    """Longitude wraps into [-180, 180)."""
    assert GeoPoint(lon=180.0, lat=0.0).lon == -180.0
    assert GeoPoint(lon=190.0, lat=0.0).lon == pytest.approx(-170.0)


def test_tile_coord_bounds_checked():
    """Tile indices must lie inside the 2^z grid."""
    with pytest.raises(DomainError):
        TileCoord(2, 4, 0)
    with pytest.raises(DomainError):
        TileCoord(1, -1, 0)


def test_round_trip_within_half_pixel():
    """lon/lat -> pixel centre -> lon/lat stays within half a pixel at zoom 15."""
    rng = np.random.default_rng(7)
    z = 15
    for lon, lat in zip(rng.uniform(-179.9, 179.9, 1000), rng.uniform(-80.0, 80.0, 1000)):
        p = GeoPoint(lon=float(lon), lat=float(lat))
        px, py = lonlat_to_pixel(p, z)
        back = pixel_to_lonlat(math.floor(px) + 0.5, math.floor(py) + 0.5, z)
        bx, by = lonlat_to_pixel(back, z)
        assert abs(bx - px) <= 0.5 + 1e-6
        assert abs(by - py) <= 0.5 + 1e-6
        assert lonlat_to_tile(back, z) == lonlat_to_tile(p, z)


def test_children_contain_deeper_tile():
    """The tile at z+1 is one of the four children of the tile at z."""
    rng = np.random.default_rng(11)
    for lon, lat in zip(rng.uniform(-180, 180, 200), rng.uniform(-85, 85, 200)):
        p = GeoPoint(lon=float(lon), lat=float(lat))
        for z in (0, 4, 12):
            parent = lonlat_to_tile(p, z)
            child = lonlat_to_tile(p, z + 1)
            assert child in parent.children()
            assert child.parent() == parent


def test_tile_bounds_round_trip():
    """The centre of a tile's bounds maps back to that tile."""
    tile = TileCoord(12, 2100, 1400)
    west, south, east, north = tile_bounds(tile)
    assert west < east and south < north
    inside = GeoPoint(lon=(west + east) / 2, lat=(south + north) / 2)
    assert lonlat_to_tile(inside, 12) == tile


def test_tile_bbox_iterates_rows():
    """A tile rectangle yields its tiles row by row."""
    bbox = TileBBox(3, 1, 2, 2, 3)
    assert list(bbox) == [TileCoord(3, 1, 2), TileCoord(3, 2, 2), TileCoord(3, 1, 3), TileCoord(3, 2, 3)]
    assert TileCoord(3, 2, 3) in bbox
    assert TileCoord(3, 3, 3) not in bbox
    assert TileBBox.covering(bbox) == bbox


def test_region_tiles_single_tile(unit_square):
    """A small region strictly inside one tile needs only that tile."""
    assert region_tiles(unit_square, 10) == {TileCoord(10, 512, 511)}


def test_region_tiles_two_by_two():
    """A square spanning a 2x2 block of tiles needs exactly those four."""
    ring = _tile_ring(500.05, 300.05, 501.95, 301.95)
    region = RegionBoundary(region_id="block", exterior=ring)
    assert region_tiles(region, 10) == {
        TileCoord(10, 500, 300),
        TileCoord(10, 501, 300),
        TileCoord(10, 500, 301),
        TileCoord(10, 501, 301),
    }


def test_region_tiles_keeps_tiles_crossed_by_hole_ring():
    """Tiles the hole's ring passes through are still needed."""
    outer = _tile_ring(100.1, 200.1, 103.9, 203.9)
    hole = _tile_ring(101.2, 201.2, 102.8, 202.8)
    region = RegionBoundary(region_id="ring", exterior=outer, holes=(hole,))
    assert len(region_tiles(region, 10)) == 16


def test_region_tiles_drops_tiles_inside_hole():
    """Tiles lying entirely inside a hole are not needed."""
    outer = _tile_ring(100.1, 200.1, 103.9, 203.9)
    hole = _tile_ring(100.9, 200.9, 103.1, 203.1)
    region = RegionBoundary(region_id="ring", exterior=outer, holes=(hole,))
    tiles = region_tiles(region, 10)
    assert len(tiles) == 12
    assert TileCoord(10, 101, 201) not in tiles


def test_boundary_rejects_open_ring():
    """A ring whose first and last points differ is invalid."""
    ring = (GeoPoint(0, 0), GeoPoint(0.01, 0), GeoPoint(0.01, 0.01), GeoPoint(0, 0.01))
    with pytest.raises(DomainError):
        RegionBoundary(region_id="open", exterior=ring)


def test_boundary_rejects_zero_area():
    """A degenerate polygon has no tiles and is rejected."""
    with pytest.raises(DomainError):
        square_boundary("flat", 0.0, 0.0, 0.01, 0.0)


def test_boundary_rejects_antimeridian_crossing():
    """Regions crossing the antimeridian must be split first."""
    with pytest.raises(DomainError):
        square_boundary("wrap", 179.9, 0.0, -179.9, 0.1)


def test_max_latitude_value():
    """The Web-Mercator band ends at atan(sinh(pi))."""
    assert MAX_LATITUDE == pytest.approx(85.0511287798, abs=1e-9)
