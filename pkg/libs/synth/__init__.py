from libs.synth.city import (
    LatentMap,
    SynthCity,
    generate_city,
    generate_corpus,
    latent_flows,
    latent_map,
)
from libs.synth.config import SynthConfig
from libs.synth.corpus import DEFAULT_RATIOS, split_corpus, split_sizes, write_city, write_corpus
from libs.synth.render import render_city_tiles

__all__ = [
    "DEFAULT_RATIOS",
    "LatentMap",
    "SynthCity",
    "SynthConfig",
    "generate_city",
    "generate_corpus",
    "latent_flows",
    "latent_map",
    "render_city_tiles",
    "split_corpus",
    "split_sizes",
    "write_city",
    "write_corpus",
]
