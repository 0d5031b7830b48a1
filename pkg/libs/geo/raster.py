"""Geo-referenced rasters: stitching tiles, region masks and masking."""

import logging
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np
import shapely

from libs.errors import DomainError, FormatError, ShapeError
from libs.geo.boundaries import RegionBoundary
from libs.geo.tilegrid import TILE_SIZE, TileBBox, TileCoord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RasterAnchor:
    """
    Geo-reference of a raster: the top-left tile, the tile size and the pixel
    offset of the raster's first pixel inside that tile grid (non-zero after
    cropping).
    """

    tile: TileCoord
    tile_size: int = TILE_SIZE
    offset_x: int = 0
    offset_y: int = 0

    @property
    def z(self) -> int:
        return self.tile.z

    @property
    def origin(self) -> tuple[int, int]:
        """Global pixel coordinates of the raster's top-left corner."""
        return (
            self.tile.x * self.tile_size + self.offset_x,
            self.tile.y * self.tile_size + self.offset_y,
        )


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RasterImage:
    """Row-major, channel-interleaved image with intensities in [0, 1]."""

    pixels: np.ndarray  # shape (height, width, channels)
    geo: RasterAnchor

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 3 or pixels.shape[2] < 1:
            raise ShapeError(f"Raster pixels must be (height, width, channels), got {pixels.shape}")
        if pixels.size and (not np.all(np.isfinite(pixels)) or pixels.min() < 0):
            raise DomainError("Raster intensities must be finite and non-negative")
        object.__setattr__(self, "pixels", _frozen(pixels))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class RegionMask:
    """Binary region mask: 1 inside the region boundary, 0 elsewhere."""

    bits: np.ndarray  # shape (height, width), dtype uint8
    geo: RasterAnchor

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ShapeError(f"Mask bits must be (height, width), got {bits.shape}")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise DomainError("Mask bits must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(bits.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def popcount(self) -> int:
        return int(self.bits.sum())

    def inverted(self) -> "RegionMask":
        return RegionMask(bits=1 - self.bits, geo=self.geo)


def stitch(
    tiles: Mapping[TileCoord, RasterImage],
    bbox: TileBBox,
    channels: Optional[int] = None,
    tile_size: int = TILE_SIZE,
) -> RasterImage:
    """
    Concatenate tiles into one raster covering ``bbox``.

    Tiles outside ``bbox`` are ignored; missing tiles are zero-filled.
    ``channels`` is only needed when no tile is present at all.
    """
    present = {t: img for t, img in tiles.items() if t in bbox}
    channel_counts = {img.channels for img in present.values()}
    if len(channel_counts) > 1:
        raise FormatError(f"Tiles have inconsistent channel counts: {sorted(channel_counts)}")
    if channel_counts:
        found = channel_counts.pop()
        if channels is not None and channels != found:
            raise FormatError(f"Expected {channels} channels, tiles have {found}")
        channels = found
    channels = channels or 3

    out = np.zeros((bbox.height * tile_size, bbox.width * tile_size, channels))
    for tile, img in present.items():
        if img.width != tile_size or img.height != tile_size:
            raise FormatError(
                f"Tile {tile} is {img.width}x{img.height}, expected {tile_size}x{tile_size}"
            )
        row = (tile.y - bbox.y_min) * tile_size
        col = (tile.x - bbox.x_min) * tile_size
        out[row : row + tile_size, col : col + tile_size, :] = img.pixels

    missing = bbox.width * bbox.height - len(present)
    if missing:
        logger.warning(f"Stitching {bbox}: {missing} missing tile(s) zero-filled")
    return RasterImage(pixels=out, geo=RasterAnchor(tile=bbox.top_left, tile_size=tile_size))


def crop(img: RasterImage, x0: int, y0: int, width: int, height: int) -> RasterImage:
    """Crop a raster to a pixel window, keeping its geo-reference."""
    if width <= 0 or height <= 0:
        raise DomainError("Crop window must be non-empty")
    if x0 < 0 or y0 < 0 or x0 + width > img.width or y0 + height > img.height:
        raise ShapeError(
            f"Crop window ({x0}, {y0}, {width}, {height}) exceeds {img.width}x{img.height} raster"
        )
    geo = replace(img.geo, offset_x=img.geo.offset_x + x0, offset_y=img.geo.offset_y + y0)
    return RasterImage(pixels=img.pixels[y0 : y0 + height, x0 : x0 + width, :], geo=geo)


def pixel_window(r: RegionBoundary, geo: RasterAnchor, width: int, height: int) -> tuple[int, int, int, int]:
    """Pixel bounding box (x0, y0, w, h) of ``r`` inside a raster, clipped to it."""
    geometry = r.projected(geo.z)
    ox, oy = geo.origin
    min_x, min_y, max_x, max_y = geometry.bounds
    x0 = max(0, int(np.floor(min_x - ox)))
    y0 = max(0, int(np.floor(min_y - oy)))
    x1 = min(width, int(np.ceil(max_x - ox)))
    y1 = min(height, int(np.ceil(max_y - oy)))
    if x1 <= x0 or y1 <= y0:
        raise DomainError(f"Region {r.region_id!r} does not overlap the raster")
    return x0, y0, x1 - x0, y1 - y0


def rasterize_mask(r: RegionBoundary, geo: RasterAnchor, width: int, height: int) -> RegionMask:
    """
    A bit is 1 iff the pixel centre lies inside the region boundary.

    Holes are excluded; a centre lying exactly on an edge counts as inside.
    """
    if width <= 0 or height <= 0:
        raise DomainError("Mask dimensions must be positive")
    geometry = r.projected(geo.z)
    shapely.prepare(geometry)

    ox, oy = geo.origin
    xs = ox + np.arange(width) + 0.5
    ys = oy + np.arange(height) + 0.5
    grid_x, grid_y = np.meshgrid(xs, ys)

    min_x, min_y, max_x, max_y = geometry.bounds
    candidates = (grid_x >= min_x) & (grid_x <= max_x) & (grid_y >= min_y) & (grid_y <= max_y)
    bits = np.zeros((height, width), dtype=np.uint8)
    if candidates.any():
        inside = shapely.intersects_xy(geometry, grid_x[candidates], grid_y[candidates])
        bits[candidates] = inside.astype(np.uint8)
    return RegionMask(bits=bits, geo=geo)


def apply_mask(img: RasterImage, m: RegionMask) -> RasterImage:
    """Element-wise product; everything outside the region becomes exactly 0."""
    if (img.height, img.width) != (m.height, m.width):
        raise ShapeError(
            f"Mask is {m.width}x{m.height} but image is {img.width}x{img.height}"
        )
    masked = np.where(m.bits[:, :, None] == 1, img.pixels, 0.0)
    return RasterImage(pixels=masked, geo=img.geo)
