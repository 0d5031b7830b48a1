import logging
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from libs.errors import DomainError, ValidationError
from libs.features.embeddings import write_embeddings
from libs.ingest.city import BOUNDARIES_FILE, OD_FILE, POPULATION_FILE
from libs.ingest.corpus import SPLIT_FILE
from libs.ingest.geojson import write_boundaries
from libs.ingest.tables import SPLITS, write_od, write_population, write_split
from libs.synth.city import SynthCity
from libs.utils.rng import stream

logger = logging.getLogger(__name__)

DEFAULT_RATIOS = (8, 1, 1)
EMBEDDINGS_FILE = "embeddings.odemb"

# Key of the corpus split inside the "split" stream.
_CORPUS_SPLIT_KEY = 1


def _half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_sizes(n: int, ratios: Sequence[int] = DEFAULT_RATIOS) -> tuple[int, int, int]:
    """(train, val, test) sizes: val/test rounded from their ratio, train takes the rest."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or ratios[0] <= 0:
        raise DomainError(f"Split ratios must be three non-negative integers with train > 0, got {tuple(ratios)}")
    total = sum(ratios)
    if n < total:
        raise ValidationError(f"Splitting {':'.join(map(str, ratios))} needs at least {total} cities, got {n}")
    n_val = _half_up(n * ratios[1] / total)
    n_test = _half_up(n * ratios[2] / total)
    return n - n_val - n_test, n_val, n_test


def split_corpus(
    cities: Sequence[SynthCity],
    ratios: Sequence[int] = DEFAULT_RATIOS,
    seed: int = 0,
) -> dict[str, list[SynthCity]]:
    """
    Disjoint train/val/test split, deterministic in (city ids, ratios, seed).

    The input order does not matter: cities are sorted by id before the
    seeded permutation is applied.

    Returns:
        {"train": [...], "val": [...], "test": [...]}, each sorted by city id
    """
    ordered = sorted(cities, key=lambda c: c.city_id)
    ids = [c.city_id for c in ordered]
    if len(set(ids)) != len(ids):
        raise ValidationError("City ids must be unique")
    n_train, n_val, _ = split_sizes(len(ordered), ratios)

    order = stream(seed, "split", _CORPUS_SPLIT_KEY).permutation(len(ordered))
    parts = {
        "train": order[:n_train],
        "val": order[n_train:n_train + n_val],
        "test": order[n_train + n_val:],
    }
    split = {name: sorted((ordered[k] for k in index), key=lambda c: c.city_id) for name, index in parts.items()}
    logger.info(
        f"Split {len(ordered)} cities into "
        f"{len(split['train'])}/{len(split['val'])}/{len(split['test'])} (train/val/test)"
    )
    return split


def write_city(city: SynthCity, directory: Union[str, Path]) -> Path:
    """Write one city in the formats the ingest loaders read."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_boundaries(directory / BOUNDARIES_FILE, city.boundaries)
    write_population(directory / POPULATION_FILE, city.populations)
    write_embeddings(directory / EMBEDDINGS_FILE, city.embeddings())
    write_od(city.od, directory / OD_FILE, format="edges")
    return directory


def write_corpus(
    cities: Sequence[SynthCity],
    directory: Union[str, Path],
    split: Mapping[str, Sequence[SynthCity]],
) -> Path:
    """One sub-directory per city plus ``split.csv``."""
    directory = Path(directory)
    for city in cities:
        write_city(city, directory / city.city_id)
    assignment = {name: [c.city_id for c in split.get(name, ())] for name in SPLITS}
    write_split(directory / SPLIT_FILE, assignment)
    logger.info(f"Wrote {len(cities)} cities to {directory}")
    return directory
