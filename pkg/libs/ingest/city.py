import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import FormatError, ValidationError
from libs.features.conditions import RegionFeature
from libs.features.embeddings import load_embeddings
from libs.geo.boundaries import RegionBoundary
from libs.ingest.geojson import load_boundaries
from libs.ingest.tables import read_od, read_population
from libs.physical.distance import RegionGeo, distance_matrix
from libs.validators import validate_id_coverage

logger = logging.getLogger(__name__)

BOUNDARIES_FILE = "boundaries.geojson"
POPULATION_FILE = "population.csv"
EMBEDDING_FILES = ("embeddings.odemb", "embeddings.csv")
OD_FILE = "od.csv"


@dataclass
class CityBundle:
    """One city; every constituent is ordered by region id."""

    name: str
    boundaries: list[RegionBoundary]
    geos: list[RegionGeo]
    features: Optional[list[RegionFeature]] = None
    od: Optional[ODMatrix] = None

    @property
    def region_ids(self) -> tuple[str, ...]:
        return tuple(b.region_id for b in self.boundaries)

    @property
    def n_regions(self) -> int:
        return len(self.boundaries)

    def distances(self) -> np.ndarray:
        return distance_matrix(self.geos)


def _require(ok_error: tuple[bool, Optional[str]]) -> None:
    is_valid, error = ok_error
    if not is_valid:
        raise ValidationError(error)


def load_city(
    boundary_path: Union[str, Path],
    population_path: Optional[Union[str, Path]] = None,
    embeddings_path: Optional[Union[str, Path]] = None,
    od_path: Optional[Union[str, Path]] = None,
    name: Optional[str] = None,
) -> CityBundle:
    """
    Load and cross-check the inputs of one city.

    Populations come from ``population_path`` when given, otherwise from the
    GeoJSON ``population`` properties; every region needs one.

    Args:
        boundary_path: GeoJSON FeatureCollection of region boundaries
        population_path: ``region_id,population`` CSV
        embeddings_path: ODEMB1 or CSV embedding file
        od_path: Reference OD CSV (edge or dense layout)
        name: City name (defaults to the boundary file's directory name)

    Returns:
        CityBundle
    """
    boundary_path = Path(boundary_path)
    parsed = load_boundaries(boundary_path)
    ids = parsed.region_ids

    if population_path is not None:
        populations = read_population(population_path)
        conflicts = [
            rid for rid, value in parsed.populations.items()
            if rid in populations and populations[rid] != value
        ]
        if conflicts:
            logger.warning(
                f"{len(conflicts)} population(s) in {population_path} differ from the GeoJSON properties; "
                "using the CSV values"
            )
        _require(validate_id_coverage(ids, populations, f"Population file {population_path}"))
    else:
        populations = parsed.populations
        missing = [rid for rid in ids if rid not in populations]
        if missing:
            raise ValidationError(f"No population for region(s): {', '.join(missing)}")

    geos = [RegionGeo(b.region_id, b.centroid(), populations[b.region_id]) for b in parsed.boundaries]

    features = None
    if embeddings_path is not None:
        embeddings = load_embeddings(embeddings_path)
        _require(validate_id_coverage(ids, embeddings, f"Embedding file {embeddings_path}"))
        features = [RegionFeature(rid, embeddings[rid], populations[rid]) for rid in ids]

    od = read_od(od_path, region_ids=ids) if od_path is not None else None

    bundle = CityBundle(
        name=name or boundary_path.parent.name,
        boundaries=parsed.boundaries,
        geos=geos,
        features=features,
        od=od,
    )
    logger.info(
        f"City {bundle.name}: {bundle.n_regions} regions"
        f"{', embeddings' if features else ''}{', reference OD' if od is not None else ''}"
    )
    return bundle


def city_paths(directory: Union[str, Path]) -> dict[str, Optional[Path]]:
    """Conventional file names inside a city directory; absent optional files map to None."""
    directory = Path(directory)
    boundaries = directory / BOUNDARIES_FILE
    if not boundaries.is_file():
        raise FormatError(f"city directory lacks {BOUNDARIES_FILE}", directory)
    population = directory / POPULATION_FILE
    embeddings = next((directory / f for f in EMBEDDING_FILES if (directory / f).is_file()), None)
    od = directory / OD_FILE
    return {
        "boundary_path": boundaries,
        "population_path": population if population.is_file() else None,
        "embeddings_path": embeddings,
        "od_path": od if od.is_file() else None,
    }


def load_city_dir(directory: Union[str, Path]) -> CityBundle:
    directory = Path(directory)
    return load_city(**city_paths(directory), name=directory.name)
