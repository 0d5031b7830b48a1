from typing import Optional, Protocol, runtime_checkable

import numpy as np

from libs.geo.raster import RasterImage, RegionMask


@runtime_checkable
class FeatureProvider(Protocol):
    """
    Stand-in for the frozen vision encoder that embeds region imagery.

    Implementations must be deterministic and return vectors of a fixed
    ``dimension``. Raster-based providers use ``image``/``mask``; file-backed
    providers only need ``region_id``.
    """

    dimension: int

    def embed(
        self,
        region_id: str,
        image: Optional[RasterImage] = None,
        mask: Optional[RegionMask] = None,
    ) -> np.ndarray: ...
