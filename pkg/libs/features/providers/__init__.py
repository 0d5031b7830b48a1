# Embedding providers package
from .base import FeatureProvider
from .file_backed import FileEmbeddingProvider
from .raster_stats import TOY_DIMENSION, RasterStatsProvider, toy_extract

__all__ = ["FeatureProvider", "FileEmbeddingProvider", "RasterStatsProvider", "TOY_DIMENSION", "toy_extract"]
