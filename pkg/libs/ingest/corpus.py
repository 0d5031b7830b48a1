import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from libs.errors import FormatError, ValidationError
from libs.ingest.city import BOUNDARIES_FILE, CityBundle, load_city_dir
from libs.ingest.tables import read_split

logger = logging.getLogger(__name__)

SPLIT_FILE = "split.csv"


def city_dirs(corpus_dir: Union[str, Path]) -> list[Path]:
    """Sub-directories holding a boundary file, sorted by name."""
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise FormatError("corpus directory not found", corpus_dir)
    return sorted(p for p in corpus_dir.iterdir() if p.is_dir() and (p / BOUNDARIES_FILE).is_file())


def load_corpus(
    corpus_dir: Union[str, Path],
    splits: Optional[Sequence[str]] = None,
) -> list[CityBundle]:
    """
    Load the cities of a corpus directory.

    Args:
        corpus_dir: Directory with one sub-directory per city
        splits: Restrict to the cities that ``split.csv`` assigns to these
            splits; ignored when the corpus has no split file

    Returns:
        Bundles sorted by city name
    """
    corpus_dir = Path(corpus_dir)
    dirs = city_dirs(corpus_dir)
    if not dirs:
        raise FormatError("corpus directory holds no city sub-directories", corpus_dir)

    split_path = corpus_dir / SPLIT_FILE
    if splits is not None and split_path.is_file():
        assignment = read_split(split_path)
        wanted = {city for name in splits for city in assignment.get(name, [])}
        unknown = wanted - {d.name for d in dirs}
        if unknown:
            raise ValidationError(f"{split_path} names missing cities: {', '.join(sorted(unknown))}")
        dirs = [d for d in dirs if d.name in wanted]

    cities = [load_city_dir(d) for d in dirs]
    logger.info(f"Loaded {len(cities)} cities from {corpus_dir}")
    return cities


def has_split(corpus_dir: Union[str, Path]) -> bool:
    return (Path(corpus_dir) / SPLIT_FILE).is_file()
