import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from libs.errors import ValidationError
from libs.features.embeddings import write_embeddings
from libs.features.providers import FileEmbeddingProvider, RasterStatsProvider
from libs.ingest.tables import read_population
from libs.services.preparation_service import PreparationService
from libs.validators import validate_id_coverage

logger = logging.getLogger(__name__)


class FeatureService:
    """Service producing region embeddings."""

    @staticmethod
    def toy_embeddings(prepared_dir: Union[str, Path]) -> dict[str, np.ndarray]:
        """
        Raster-statistics embeddings of prepared regions.

        Args:
            prepared_dir: Output directory of the prepare stage

        Returns:
            Mapping region_id -> 64-dimensional embedding
        """
        provider = RasterStatsProvider()
        return {
            entry.region_id: provider.embed(entry.region_id, image, mask)
            for entry, image, mask in PreparationService.load_prepared(prepared_dir)
        }

    @staticmethod
    def ingest_embeddings(path: Union[str, Path]) -> dict[str, np.ndarray]:
        provider = FileEmbeddingProvider(path)
        return {region_id: provider.embed(region_id) for region_id in sorted(provider.embeddings)}

    @staticmethod
    def build(
        mode: str,
        source: Union[str, Path],
        out_path: Union[str, Path],
        population_path: Optional[Union[str, Path]] = None,
    ) -> dict[str, np.ndarray]:
        """
        Compute (``toy``) or import (``ingest``) embeddings and write them to ``out_path``.

        Args:
            mode: "toy" (prepared rasters) or "ingest" (existing embedding file)
            source: Prepared directory or embedding file
            out_path: Embedding file to write (ODEMB1, or CSV by suffix)
            population_path: When given, its region ids must match the embeddings'

        Returns:
            The written embeddings
        """
        if mode == "toy":
            embeddings = FeatureService.toy_embeddings(source)
        elif mode == "ingest":
            embeddings = FeatureService.ingest_embeddings(source)
        else:
            raise ValidationError(f"Unknown feature mode {mode!r} (expected toy or ingest)")

        if population_path is not None:
            populations = read_population(population_path)
            is_valid, error = validate_id_coverage(populations, embeddings, f"Embeddings from {source}")
            if not is_valid:
                raise ValidationError(error)

        write_embeddings(out_path, embeddings)
        logger.info(f"Wrote {len(embeddings)} embeddings ({mode}) to {out_path}")
        return embeddings
