"""Region conditioning features (embeddings + population)."""

from .conditions import (
    ConditionSet,
    FeatureStats,
    RegionFeature,
    build_conditions,
    fit_feature_stats,
    raw_condition_matrix,
)
from .embeddings import load_embeddings, write_embeddings
from .providers import FeatureProvider, FileEmbeddingProvider, RasterStatsProvider, toy_extract

__all__ = [
    "RegionFeature",
    "FeatureStats",
    "ConditionSet",
    "build_conditions",
    "fit_feature_stats",
    "raw_condition_matrix",
    "load_embeddings",
    "write_embeddings",
    "FeatureProvider",
    "FileEmbeddingProvider",
    "RasterStatsProvider",
    "toy_extract",
]
