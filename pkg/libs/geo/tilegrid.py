"""
Web-Mercator "slippy map" tile math.

Tiles follow the XYZ scheme used by OSM, Google and Esri: 256 px squares,
``x`` growing eastward and ``y`` growing southward, ``2**z`` tiles per axis.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from libs.errors import DomainError

TILE_SIZE = 256
MAX_LATITUDE = math.degrees(math.atan(math.sinh(math.pi)))  # 85.05112877980659
MAX_ZOOM = 30


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate; longitude is normalized to [-180, 180)."""

    lon: float
    lat: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise DomainError(f"Non-finite coordinate ({self.lon}, {self.lat})")
        if abs(self.lat) > MAX_LATITUDE:
            raise DomainError(
                f"Latitude {self.lat} outside the Web-Mercator band ±{MAX_LATITUDE:.4f}"
            )
        lon = (self.lon + 180.0) % 360.0 - 180.0
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True, order=True)
class TileCoord:
    z: int
    x: int
    y: int

    def __post_init__(self) -> None:
        if not 0 <= self.z <= MAX_ZOOM:
            raise DomainError(f"Zoom {self.z} outside [0, {MAX_ZOOM}]")
        n = 1 << self.z
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise DomainError(f"Tile ({self.z}/{self.x}/{self.y}) outside the {n}x{n} grid")

    def parent(self) -> "TileCoord":
        if self.z == 0:
            raise DomainError("The zoom-0 tile has no parent")
        return TileCoord(self.z - 1, self.x // 2, self.y // 2)

    def children(self) -> tuple["TileCoord", ...]:
        z, x, y = self.z + 1, self.x * 2, self.y * 2
        return (
            TileCoord(z, x, y),
            TileCoord(z, x + 1, y),
            TileCoord(z, x, y + 1),
            TileCoord(z, x + 1, y + 1),
        )

    def __str__(self) -> str:
        return f"{self.z}/{self.x}/{self.y}"


@dataclass(frozen=True)
class TileBBox:
    """Inclusive rectangle of tile indices at one zoom level."""

    z: int
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise DomainError(f"Empty tile rectangle {self}")
        TileCoord(self.z, self.x_min, self.y_min)
        TileCoord(self.z, self.x_max, self.y_max)

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def top_left(self) -> TileCoord:
        return TileCoord(self.z, self.x_min, self.y_min)

    def __contains__(self, tile: object) -> bool:
        return (
            isinstance(tile, TileCoord)
            and tile.z == self.z
            and self.x_min <= tile.x <= self.x_max
            and self.y_min <= tile.y <= self.y_max
        )

    def __iter__(self) -> Iterator[TileCoord]:
        for y in range(self.y_min, self.y_max + 1):
            for x in range(self.x_min, self.x_max + 1):
                yield TileCoord(self.z, x, y)

    @classmethod
    def covering(cls, tiles: Iterable[TileCoord]) -> "TileBBox":
        tiles = list(tiles)
        if not tiles:
            raise DomainError("Cannot cover an empty tile set")
        zooms = {t.z for t in tiles}
        if len(zooms) != 1:
            raise DomainError(f"Tiles span several zoom levels: {sorted(zooms)}")
        return cls(
            z=tiles[0].z,
            x_min=min(t.x for t in tiles),
            y_min=min(t.y for t in tiles),
            x_max=max(t.x for t in tiles),
            y_max=max(t.y for t in tiles),
        )


def _check_zoom(z: int) -> None:
    if not 0 <= z <= MAX_ZOOM:
        raise DomainError(f"Zoom {z} outside [0, {MAX_ZOOM}]")


def world_size(z: int) -> int:
    """Width of the world in pixels at zoom ``z``."""
    return TILE_SIZE << z


def mercator_fraction(lon: float, lat: float) -> tuple[float, float]:
    """Position in the unit Mercator square, (0, 0) at the north-west corner."""
    if abs(lat) > MAX_LATITUDE:
        raise DomainError(f"Latitude {lat} outside the Web-Mercator band")
    phi = math.radians(lat)
    fx = (lon + 180.0) / 360.0
    fy = (1.0 - math.asinh(math.tan(phi)) / math.pi) / 2.0
    return fx, fy


def lonlat_to_pixel(p: GeoPoint, z: int) -> tuple[float, float]:
    """Global (fractional) pixel coordinates of ``p`` at zoom ``z``."""
    _check_zoom(z)
    fx, fy = mercator_fraction(p.lon, p.lat)
    size = world_size(z)
    return fx * size, fy * size


def pixel_to_lonlat(px: float, py: float, z: int) -> GeoPoint:
    _check_zoom(z)
    size = world_size(z)
    lon = px / size * 360.0 - 180.0
    lat = math.degrees(math.atan(math.sinh(math.pi * (1.0 - 2.0 * py / size))))
    return GeoPoint(lon=lon, lat=max(-MAX_LATITUDE, min(MAX_LATITUDE, lat)))


def lonlat_to_tile(p: GeoPoint, z: int) -> TileCoord:
    """
    Tile containing ``p`` at zoom ``z``.

    x = floor((lon + 180) / 360 * 2^z),
    y = floor((1 - ln(tan(lat) + sec(lat)) / pi) / 2 * 2^z).
    Points on the southern/eastern world edge are clamped into the last tile.
    """
    _check_zoom(z)
    n = 1 << z
    fx, fy = mercator_fraction(p.lon, p.lat)
    x = min(n - 1, max(0, math.floor(fx * n)))
    y = min(n - 1, max(0, math.floor(fy * n)))
    return TileCoord(z, x, y)


def tile_to_lonlat(tile: TileCoord) -> GeoPoint:
    """North-west corner of ``tile``."""
    return pixel_to_lonlat(tile.x * TILE_SIZE, tile.y * TILE_SIZE, tile.z)


def tile_bounds(tile: TileCoord) -> tuple[float, float, float, float]:
    """(west, south, east, north) in degrees."""
    nw = tile_to_lonlat(tile)
    size = world_size(tile.z)
    east = (tile.x + 1) * TILE_SIZE / size * 360.0 - 180.0
    south = pixel_to_lonlat(0, (tile.y + 1) * TILE_SIZE, tile.z).lat
    return nw.lon, south, east, nw.lat
