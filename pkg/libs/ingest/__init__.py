from libs.ingest.city import CityBundle, city_paths, load_city, load_city_dir
from libs.ingest.corpus import SPLIT_FILE, city_dirs, has_split, load_corpus
from libs.ingest.geojson import BoundaryFile, load_boundaries, write_boundaries
from libs.ingest.tables import (
    SPLITS,
    read_od,
    read_population,
    read_split,
    write_od,
    write_population,
    write_split,
)

__all__ = [
    "SPLITS",
    "SPLIT_FILE",
    "BoundaryFile",
    "CityBundle",
    "city_dirs",
    "city_paths",
    "has_split",
    "load_boundaries",
    "load_city",
    "load_city_dir",
    "load_corpus",
    "read_od",
    "read_population",
    "read_split",
    "write_boundaries",
    "write_od",
    "write_population",
    "write_split",
]
