from pathlib import Path
from typing import Optional, Union

import numpy as np

from libs.errors import ValidationError
from libs.features.embeddings import load_embeddings
from libs.geo.raster import RasterImage, RegionMask


class FileEmbeddingProvider:
    """Serves embeddings computed elsewhere (e.g. by a pretrained encoder)."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.embeddings = load_embeddings(self.path)
        first = next(iter(self.embeddings.values()), None)
        self.dimension = 0 if first is None else int(first.shape[0])

    def __contains__(self, region_id: str) -> bool:
        return region_id in self.embeddings

    def embed(
        self,
        region_id: str,
        image: Optional[RasterImage] = None,
        mask: Optional[RegionMask] = None,
    ) -> np.ndarray:
        try:
            return self.embeddings[region_id].copy()
        except KeyError:
            raise ValidationError(f"{self.path}: no embedding for region {region_id!r}") from None
