"""
Deterministic raster-statistics embedding (offline stand-in for the encoder).

Layout of the 64 values (channels beyond the fourth are ignored, missing
channels contribute zeros):

    0-3    per-channel mean          4-7    per-channel variance
    8-11   per-channel 10th pct      12-15  per-channel 90th pct
    16-47  32-bin luminance histogram over [0, 1] (sums to 1)
    48     mask fill ratio           49     log-size of the mask
    50     mask compactness          51     luminance median
    52     luminance skewness        53     luminance excess kurtosis
    54     gradient magnitude        55     share of strong edges
    56-59  per-channel mean |dx|     60-63  per-channel mean |dy|

Only in-mask pixels (and differences between two in-mask neighbours) are
read, so pixels outside the region never influence the result.
"""

from typing import Optional

import numpy as np

from libs.errors import DomainError, ShapeError
from libs.geo.raster import RasterImage, RegionMask

TOY_DIMENSION = 64
MAX_CHANNELS = 4
HISTOGRAM_BINS = 32
EDGE_THRESHOLD = 0.1


def _channel_slots(values: np.ndarray) -> np.ndarray:
    out = np.zeros(MAX_CHANNELS)
    k = min(MAX_CHANNELS, values.shape[0])
    out[:k] = values[:k]
    return out


def _neighbour_diffs(pixels: np.ndarray, bits: np.ndarray, axis: int) -> np.ndarray:
    """Differences between neighbouring pixels along ``axis`` where both are in-mask."""
    if axis == 1:
        both = (bits[:, 1:] == 1) & (bits[:, :-1] == 1)
        diffs = pixels[:, 1:, :] - pixels[:, :-1, :]
    else:
        both = (bits[1:, :] == 1) & (bits[:-1, :] == 1)
        diffs = pixels[1:, :, :] - pixels[:-1, :, :]
    return diffs[both]  # (pairs, channels)


def toy_extract(img: RasterImage, mask: RegionMask) -> np.ndarray:
    """64 finite statistics of the in-mask pixels of ``img``."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise ShapeError(f"Mask is {mask.width}x{mask.height} but image is {img.width}x{img.height}")
    bits = mask.bits
    inside = bits == 1
    count = int(inside.sum())
    if count == 0:
        raise DomainError("Cannot extract features from an empty mask")

    pixels = img.pixels
    values = pixels[inside]  # (count, channels)
    luminance = values.mean(axis=1)

    out = np.zeros(TOY_DIMENSION)
    out[0:4] = _channel_slots(values.mean(axis=0))
    out[4:8] = _channel_slots(values.var(axis=0))
    out[8:12] = _channel_slots(np.percentile(values, 10, axis=0))
    out[12:16] = _channel_slots(np.percentile(values, 90, axis=0))

    histogram, _ = np.histogram(np.clip(luminance, 0.0, 1.0), bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    out[16:48] = histogram / count

    rows, cols = np.nonzero(inside)
    bbox_area = (rows.max() - rows.min() + 1) * (cols.max() - cols.min() + 1)
    out[48] = count / bits.size
    out[49] = np.log1p(count) / 20.0
    out[50] = count / bbox_area
    out[51] = np.median(luminance)

    spread = luminance.std()
    if spread > 0:
        z = (luminance - luminance.mean()) / spread
        out[52] = np.mean(z**3)
        out[53] = np.mean(z**4) - 3.0

    dx = _neighbour_diffs(pixels, bits, axis=1)
    dy = _neighbour_diffs(pixels, bits, axis=0)
    lum_dx = dx.mean(axis=1) if len(dx) else np.zeros(0)
    lum_dy = dy.mean(axis=1) if len(dy) else np.zeros(0)
    mean_sq_dx = float(np.mean(lum_dx**2)) if len(lum_dx) else 0.0
    mean_sq_dy = float(np.mean(lum_dy**2)) if len(lum_dy) else 0.0
    out[54] = np.sqrt(mean_sq_dx + mean_sq_dy)
    all_diffs = np.abs(np.concatenate([lum_dx, lum_dy]))
    out[55] = float(np.mean(all_diffs > EDGE_THRESHOLD)) if len(all_diffs) else 0.0
    if len(dx):
        out[56:60] = _channel_slots(np.abs(dx).mean(axis=0))
    if len(dy):
        out[60:64] = _channel_slots(np.abs(dy).mean(axis=0))
    return out


class RasterStatsProvider:
    """FeatureProvider backed by :func:`toy_extract`."""

    dimension = TOY_DIMENSION

    def embed(
        self,
        region_id: str,
        image: Optional[RasterImage] = None,
        mask: Optional[RegionMask] = None,
    ) -> np.ndarray:
        if image is None or mask is None:
            raise DomainError(f"Region {region_id!r}: raster statistics need an image and its mask")
        return toy_extract(image, mask)
