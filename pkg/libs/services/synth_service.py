import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from libs.geo.tilestore import TileStore
from libs.synth.city import SynthCity, generate_corpus
from libs.synth.config import SynthConfig
from libs.synth.corpus import DEFAULT_RATIOS, split_corpus, write_corpus
from libs.synth.render import DEFAULT_RENDER_ZOOM, render_city_tiles

logger = logging.getLogger(__name__)


class SynthService:
    """Service writing synthetic corpora."""

    @staticmethod
    def create_corpus(
        config: SynthConfig,
        out_dir: Union[str, Path],
        ratios: Sequence[int] = DEFAULT_RATIOS,
        tiles_dir: Optional[Union[str, Path]] = None,
        zoom: int = DEFAULT_RENDER_ZOOM,
    ) -> dict[str, list[SynthCity]]:
        """
        Generate, split and write a corpus; optionally render its tiles.

        Args:
            config: Corpus configuration (its seed also drives the split)
            out_dir: Corpus directory
            ratios: train:val:test ratios
            tiles_dir: When given, procedural tiles are rendered into this cache
            zoom: Render zoom level

        Returns:
            The split, {"train": [...], "val": [...], "test": [...]}
        """
        cities = generate_corpus(config)
        split = split_corpus(cities, ratios, config.seed)
        write_corpus(cities, out_dir, split)
        if tiles_dir is not None:
            store = TileStore(tiles_dir)
            for city in cities:
                render_city_tiles(city, store, zoom, config.seed)
        return split
