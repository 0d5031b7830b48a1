import math

import numpy as np
import pytest

from libs.errors import FormatError, ShapeError
from libs.geo.boundaries import RegionBoundary
from libs.geo.raster import (
    RasterAnchor,
    RasterImage,
    RegionMask,
    apply_mask,
    crop,
    pixel_window,
    rasterize_mask,
    stitch,
)
from libs.geo.tilegrid import TILE_SIZE, GeoPoint, TileBBox, TileCoord, pixel_to_lonlat


def _tile(tile: TileCoord, value: float, channels: int = 3) -> RasterImage:
    return RasterImage(
        pixels=np.full((TILE_SIZE, TILE_SIZE, channels), value),
        geo=RasterAnchor(tile=tile),
    )


def _image(height: int, width: int, value: float = 0.7) -> RasterImage:
    return RasterImage(pixels=np.full((height, width, 3), value), geo=RasterAnchor(tile=TileCoord(10, 0, 0)))


def _pixel_square(anchor: RasterAnchor, x0: float, y0: float, x1: float, y1: float) -> RegionBoundary:
    """Rectangle given in raster-local pixel coordinates."""
    ox, oy = anchor.origin
    corners = [
        pixel_to_lonlat(ox + x0, oy + y1, anchor.z),
        pixel_to_lonlat(ox + x1, oy + y1, anchor.z),
        pixel_to_lonlat(ox + x1, oy + y0, anchor.z),
        pixel_to_lonlat(ox + x0, oy + y0, anchor.z),
    ]
    return RegionBoundary(region_id="px", exterior=(*corners, corners[0]))


def test_stitch_single_tile_is_identity():
    """Stitching one tile returns the same pixels."""
    tile = TileCoord(5, 3, 4)
    img = _tile(tile, 0.25)
    out = stitch({tile: img}, TileBBox.covering([tile]))
    assert np.array_equal(out.pixels, img.pixels)
    assert out.geo.tile == tile


def test_stitch_side_by_side():
    """Two tiles in a row fill the left and right halves."""
    left, right = TileCoord(5, 3, 4), TileCoord(5, 4, 4)
    out = stitch({left: _tile(left, 0.2), right: _tile(right, 0.8)}, TileBBox.covering([left, right]))
    assert (out.width, out.height) == (2 * TILE_SIZE, TILE_SIZE)
    assert np.all(out.pixels[:, :TILE_SIZE] == 0.2)
    assert np.all(out.pixels[:, TILE_SIZE:] == 0.8)


def test_stitch_zero_fills_missing_tile():
    """A missing tile leaves its quadrant at zero."""
    bbox = TileBBox(5, 3, 4, 4, 5)
    tiles = {t: _tile(t, 0.5) for t in bbox if t != TileCoord(5, 4, 5)}
    out = stitch(tiles, bbox)
    assert np.all(out.pixels[TILE_SIZE:, TILE_SIZE:] == 0.0)
    assert np.all(out.pixels[:TILE_SIZE, :] == 0.5)
    assert np.all(out.pixels[TILE_SIZE:, :TILE_SIZE] == 0.5)


def test_stitch_rejects_mixed_channels():
    """Tiles with different channel counts cannot be stitched."""
    a, b = TileCoord(5, 3, 4), TileCoord(5, 4, 4)
    with pytest.raises(FormatError):
        stitch({a: _tile(a, 0.1, channels=3), b: _tile(b, 0.1, channels=1)}, TileBBox.covering([a, b]))


def test_crop_shifts_anchor():
    """Cropping keeps the geo-reference of the first retained pixel."""
    img = _image(20, 30)
    out = crop(img, 5, 7, 10, 4)
    assert (out.width, out.height) == (10, 4)
    assert out.geo.origin == (img.geo.origin[0] + 5, img.geo.origin[1] + 7)
    with pytest.raises(ShapeError):
        crop(img, 25, 0, 10, 4)


def test_mask_pixel_inside_and_outside():
    """Pixel centres inside the polygon are 1, outside are 0."""
    anchor = RasterAnchor(tile=TileCoord(16, 30000, 30000))
    region = _pixel_square(anchor, 2.0, 3.0, 6.0, 8.0)
    mask = rasterize_mask(region, anchor, 10, 10)
    assert mask.bits[5, 4] == 1
    assert mask.bits[0, 0] == 0
    assert mask.bits[5, 8] == 0
    assert mask.popcount() == 4 * 5


def test_mask_excludes_hole():
    """Pixels inside a hole are outside the region."""
    anchor = RasterAnchor(tile=TileCoord(16, 30000, 30000))
    outer = _pixel_square(anchor, 0.0, 0.0, 10.0, 10.0)
    hole = _pixel_square(anchor, 4.0, 4.0, 6.0, 6.0)
    region = RegionBoundary(region_id="holed", exterior=outer.exterior, holes=(hole.exterior,))
    mask = rasterize_mask(region, anchor, 10, 10)
    assert mask.bits[4, 4] == 0
    assert mask.bits[1, 1] == 1
    assert mask.popcount() == 100 - 4


def test_mask_complementarity():
    """A mask and its inverse partition the raster."""
    anchor = RasterAnchor(tile=TileCoord(16, 30000, 30000))
    mask = rasterize_mask(_pixel_square(anchor, 1.3, 2.7, 7.1, 5.9), anchor, 12, 9)
    assert mask.popcount() + mask.inverted().popcount() == 12 * 9


def test_mask_fill_ratio_matches_polygon_area():
    """Mask coverage tracks the projected area of random convex polygons."""
    rng = np.random.default_rng(5)
    z = 15
    for k in range(20):
        lon0, lat0 = rng.uniform(-100, 100), rng.uniform(-60, 60)
        radius = rng.uniform(0.006, 0.012)
        angles = 2 * math.pi * np.arange(8) / 8 + rng.uniform(-0.3, 0.3, 8)
        ring = [GeoPoint(lon0 + radius * math.cos(a), lat0 + radius * math.sin(a)) for a in angles]
        region = RegionBoundary(region_id=f"p{k}", exterior=(*ring, ring[0]))

        min_x, min_y, max_x, max_y = region.projected(z).bounds
        anchor = RasterAnchor(tile=TileCoord(z, int(min_x // TILE_SIZE), int(min_y // TILE_SIZE)))
        ox, oy = anchor.origin
        width = math.ceil(max_x - ox) + 1
        height = math.ceil(max_y - oy) + 1
        mask = rasterize_mask(region, anchor, width, height)
        assert mask.popcount() == pytest.approx(region.projected_area(z), rel=0.02)


def test_pixel_window_clips_to_region():
    """The crop window is the region's pixel bounding box."""
    anchor = RasterAnchor(tile=TileCoord(16, 30000, 30000))
    region = _pixel_square(anchor, 2.0, 3.0, 6.0, 8.0)
    assert pixel_window(region, anchor, 20, 20) == (2, 3, 4, 5)


def test_apply_mask_identity_and_zero():
    """An all-ones mask keeps the image; an all-zeros mask clears it."""
    img = _image(4, 6)
    ones = RegionMask(bits=np.ones((4, 6), dtype=np.uint8), geo=img.geo)
    zeros = RegionMask(bits=np.zeros((4, 6), dtype=np.uint8), geo=img.geo)
    assert np.array_equal(apply_mask(img, ones).pixels, img.pixels)
    assert not apply_mask(img, zeros).pixels.any()


def test_apply_mask_checkerboard():
    """A checkerboard mask on a constant image alternates 0 and the value."""
    img = _image(4, 4, value=0.6)
    bits = (np.indices((4, 4)).sum(axis=0) % 2).astype(np.uint8)
    out = apply_mask(img, RegionMask(bits=bits, geo=img.geo))
    assert np.array_equal(out.pixels[:, :, 0], bits * 0.6)


def test_apply_mask_idempotent():
    """Masking twice equals masking once, bit for bit."""
    rng = np.random.default_rng(2)
    img = RasterImage(pixels=rng.random((8, 8, 3)), geo=RasterAnchor(tile=TileCoord(10, 0, 0)))
    mask = RegionMask(bits=rng.integers(0, 2, (8, 8)).astype(np.uint8), geo=img.geo)
    once = apply_mask(img, mask)
    assert np.array_equal(apply_mask(once, mask).pixels, once.pixels)


def test_apply_mask_shape_mismatch():
    """Mask and image must have the same dimensions."""
    img = _image(4, 6)
    with pytest.raises(ShapeError):
        apply_mask(img, RegionMask(bits=np.ones((4, 5), dtype=np.uint8), geo=img.geo))
