"""
On-disk tile cache: ``{root}/{z}/{x}/{y}.png`` or ``{root}/{z}/{x}/{y}.raw``.

The raw format ("ODTILE1") is a small planar container used for tests and
for masked region rasters::

    b"ODTILE1" | u16 width | u16 height | u8 channels | f32 LE samples

Samples are stored row-major, channel-interleaved (height, width, channels).
"""

import io
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from libs.errors import FormatError
from libs.geo.raster import RasterAnchor, RasterImage, RegionMask
from libs.geo.tilegrid import TILE_SIZE, TileCoord
from libs.utils.files import atomic_write_bytes

logger = logging.getLogger(__name__)

RAW_MAGIC = b"ODTILE1"
_RAW_HEADER = struct.Struct("<HHB")


def decode_png(data: bytes, source: Union[str, Path] = "<bytes>") -> np.ndarray:
    """8-bit RGB or grayscale PNG -> float array in [0, 1], shape (h, w, c)."""
    try:
        with Image.open(io.BytesIO(data)) as image:
            if image.mode not in ("L", "RGB"):
                image = image.convert("L" if image.mode in ("1", "I", "I;16", "LA") else "RGB")
            array = np.asarray(image, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as e:
        raise FormatError(f"not a readable PNG ({e})", source) from e
    if array.ndim == 2:
        array = array[:, :, None]
    return array.astype(np.float64) / 255.0


def encode_png(pixels: np.ndarray) -> bytes:
    """Float array in [0, 1] -> 8-bit PNG bytes (1 or 3 channels)."""
    samples = np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    if samples.shape[2] == 1:
        image = Image.fromarray(samples[:, :, 0])
    elif samples.shape[2] == 3:
        image = Image.fromarray(samples)
    else:
        raise FormatError(f"PNG tiles need 1 or 3 channels, got {samples.shape[2]}")
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def encode_raw(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    height, width, channels = pixels.shape
    if width > 0xFFFF or height > 0xFFFF or channels > 0xFF:
        raise FormatError(f"Raster {width}x{height}x{channels} too large for ODTILE1")
    header = RAW_MAGIC + _RAW_HEADER.pack(width, height, channels)
    return header + pixels.astype("<f4").tobytes(order="C")


def decode_raw(data: bytes, source: Union[str, Path] = "<bytes>") -> np.ndarray:
    if not data.startswith(RAW_MAGIC):
        raise FormatError("missing ODTILE1 magic", source)
    offset = len(RAW_MAGIC)
    if len(data) < offset + _RAW_HEADER.size:
        raise FormatError("truncated ODTILE1 header", source)
    width, height, channels = _RAW_HEADER.unpack_from(data, offset)
    offset += _RAW_HEADER.size
    expected = width * height * channels * 4
    if len(data) - offset != expected:
        raise FormatError(
            f"ODTILE1 payload has {len(data) - offset} bytes, expected {expected}", source
        )
    if channels < 1:
        raise FormatError("ODTILE1 raster with zero channels", source)
    samples = np.frombuffer(data, dtype="<f4", offset=offset).astype(np.float64)
    return samples.reshape(height, width, channels)


def read_raw_raster(path: Union[str, Path], geo: RasterAnchor) -> RasterImage:
    path = Path(path)
    return RasterImage(pixels=decode_raw(path.read_bytes(), path), geo=geo)


def write_raw_raster(path: Union[str, Path], img: RasterImage) -> Path:
    return atomic_write_bytes(path, encode_raw(img.pixels))


def read_raw_mask(path: Union[str, Path], geo: RasterAnchor) -> RegionMask:
    path = Path(path)
    samples = decode_raw(path.read_bytes(), path)
    if samples.shape[2] != 1:
        raise FormatError("mask rasters must have exactly one channel", path)
    return RegionMask(bits=(samples[:, :, 0] > 0.5).astype(np.uint8), geo=geo)


def write_raw_mask(path: Union[str, Path], m: RegionMask) -> Path:
    return atomic_write_bytes(path, encode_raw(m.bits.astype(np.float32)))


class TileStore:
    """Read/write access to a ``{z}/{x}/{y}.{ext}`` tile directory."""

    EXTENSIONS = ("png", "raw")

    def __init__(self, root: Union[str, Path], tile_size: int = TILE_SIZE):
        self.root = Path(root)
        self.tile_size = tile_size

    def path_for(self, tile: TileCoord, ext: str = "png") -> Path:
        return self.root / str(tile.z) / str(tile.x) / f"{tile.y}.{ext}"

    def find(self, tile: TileCoord) -> Optional[Path]:
        for ext in self.EXTENSIONS:
            path = self.path_for(tile, ext)
            if path.is_file():
                return path
        return None

    def has(self, tile: TileCoord) -> bool:
        return self.find(tile) is not None

    def read(self, tile: TileCoord) -> Optional[RasterImage]:
        """Load a tile, or None when it is not cached."""
        path = self.find(tile)
        if path is None:
            return None
        data = path.read_bytes()
        pixels = decode_raw(data, path) if path.suffix == ".raw" else decode_png(data, path)
        if pixels.shape[:2] != (self.tile_size, self.tile_size):
            raise FormatError(
                f"tile is {pixels.shape[1]}x{pixels.shape[0]}, expected "
                f"{self.tile_size}x{self.tile_size}",
                path,
            )
        return RasterImage(pixels=pixels, geo=RasterAnchor(tile=tile, tile_size=self.tile_size))

    def read_many(self, tiles: set[TileCoord]) -> dict[TileCoord, RasterImage]:
        found = {}
        for tile in sorted(tiles):
            img = self.read(tile)
            if img is not None:
                found[tile] = img
        return found

    def write_bytes(self, tile: TileCoord, data: bytes, ext: str = "png") -> Path:
        return atomic_write_bytes(self.path_for(tile, ext), data)

    def write(self, tile: TileCoord, pixels: np.ndarray, ext: str = "png") -> Path:
        data = encode_png(pixels) if ext == "png" else encode_raw(pixels)
        return self.write_bytes(tile, data, ext)
