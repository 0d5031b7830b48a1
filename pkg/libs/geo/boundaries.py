"""Region boundaries (polygons with holes, optionally multi-part)."""

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import shapely
from shapely.geometry import MultiPolygon, Polygon, box
from shapely.validation import explain_validity

from libs.errors import DomainError
from libs.geo.tilegrid import (
    TILE_SIZE,
    GeoPoint,
    TileBBox,
    TileCoord,
    mercator_fraction,
    pixel_to_lonlat,
    world_size,
)

Ring = tuple[GeoPoint, ...]

# Projected coordinates are snapped to this many decimals of a pixel so that
# tile edges built from tile corners land exactly on integer pixel lines.
PIXEL_DECIMALS = 6

# Zoom used for validity checks and centroids; fine enough for sub-metre rings.
REFERENCE_ZOOM = 16


def _check_ring(ring: Sequence[GeoPoint], what: str) -> None:
    if len(ring) < 4:
        raise DomainError(f"{what} needs at least 4 points, got {len(ring)}")
    if ring[0] != ring[-1]:
        raise DomainError(f"{what} is not closed (first point != last point)")


@dataclass(frozen=True)
class PolygonPart:
    exterior: Ring
    holes: tuple[Ring, ...] = ()


@dataclass(frozen=True)
class RegionBoundary:
    """
    Boundary of an urban region.

    ``exterior``/``holes`` describe the main polygon; ``extra_parts`` holds the
    remaining members of a MultiPolygon, which is treated as the union of its
    parts.
    """

    region_id: str
    exterior: Ring
    holes: tuple[Ring, ...] = ()
    extra_parts: tuple[PolygonPart, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.region_id:
            raise DomainError("Region boundary without a region_id")
        for i, part in enumerate(self.parts):
            _check_ring(part.exterior, f"Region {self.region_id!r} part {i} exterior")
            for j, hole in enumerate(part.holes):
                _check_ring(hole, f"Region {self.region_id!r} part {i} hole {j}")

        lons = [p.lon for part in self.parts for p in part.exterior]
        if max(lons) - min(lons) > 180.0:
            raise DomainError(
                f"Region {self.region_id!r} crosses the antimeridian; split it first"
            )

        geometry = self.projected(REFERENCE_ZOOM)
        if geometry.area <= 0:
            raise DomainError(f"Region {self.region_id!r} has zero area")
        if not geometry.is_valid:
            raise DomainError(
                f"Region {self.region_id!r} has an invalid polygon: {explain_validity(geometry)}"
            )

    @property
    def parts(self) -> tuple[PolygonPart, ...]:
        return (PolygonPart(self.exterior, self.holes), *self.extra_parts)

    def projected(self, z: int) -> Union[Polygon, MultiPolygon]:
        """Geometry in global pixel coordinates at zoom ``z`` (y grows southward)."""
        size = world_size(z)

        def project(ring: Ring) -> list[tuple[float, float]]:
            coords = []
            for p in ring:
                fx, fy = mercator_fraction(p.lon, p.lat)
                coords.append((round(fx * size, PIXEL_DECIMALS), round(fy * size, PIXEL_DECIMALS)))
            return coords

        polygons = [
            Polygon(project(part.exterior), [project(h) for h in part.holes])
            for part in self.parts
        ]
        if len(polygons) == 1:
            return polygons[0]
        return MultiPolygon(polygons)

    def projected_area(self, z: int) -> float:
        """Shoelace area (holes removed) in square pixels at zoom ``z``."""
        return float(self.projected(z).area)

    def centroid(self) -> GeoPoint:
        """Area-weighted centroid of the Mercator-projected polygon."""
        geometry = self.projected(REFERENCE_ZOOM)
        c = shapely.centroid(geometry)
        return pixel_to_lonlat(c.x, c.y, REFERENCE_ZOOM)


def square_boundary(region_id: str, west: float, south: float, east: float, north: float) -> RegionBoundary:
    """Axis-aligned rectangle in lon/lat, counter-clockwise."""
    ring = (
        GeoPoint(west, south),
        GeoPoint(east, south),
        GeoPoint(east, north),
        GeoPoint(west, north),
        GeoPoint(west, south),
    )
    return RegionBoundary(region_id=region_id, exterior=ring)


def region_tiles(r: RegionBoundary, z: int) -> set[TileCoord]:
    """
    Tiles needed to cover region ``r`` at zoom ``z``.

    Candidates come from the bounding box; a tile is kept when its square
    shares interior area with the polygon (tiles only touching an edge or a
    corner are dropped, tiles lying entirely inside a hole are dropped).
    """
    geometry = r.projected(z)
    if geometry.area <= 0:
        raise DomainError(f"Region {r.region_id!r} has zero area at zoom {z}")
    shapely.prepare(geometry)

    n = 1 << z
    min_x, min_y, max_x, max_y = geometry.bounds
    x_lo = max(0, math.floor(min_x / TILE_SIZE))
    y_lo = max(0, math.floor(min_y / TILE_SIZE))
    x_hi = min(n - 1, max(x_lo, math.ceil(max_x / TILE_SIZE) - 1))
    y_hi = min(n - 1, max(y_lo, math.ceil(max_y / TILE_SIZE) - 1))

    tiles = set()
    for tile in TileBBox(z, x_lo, y_lo, x_hi, y_hi):
        square = box(
            tile.x * TILE_SIZE,
            tile.y * TILE_SIZE,
            (tile.x + 1) * TILE_SIZE,
            (tile.y + 1) * TILE_SIZE,
        )
        if geometry.intersects(square) and not geometry.touches(square):
            tiles.add(tile)

    if not tiles:
        raise DomainError(f"Region {r.region_id!r} covers no tile at zoom {z}")
    return tiles
