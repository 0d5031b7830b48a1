from dataclasses import dataclass
from typing import Sequence

import numpy as np

from libs.errors import DomainError
from libs.geo.tilegrid import GeoPoint

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class RegionGeo:
    region_id: str
    centroid: GeoPoint
    population: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.population) or self.population < 0:
            raise DomainError(f"Population of {self.region_id!r} must be finite and >= 0")
        object.__setattr__(self, "population", float(self.population))


def haversine_km(lon1, lat1, lon2, lat2) -> np.ndarray:
    """Great-circle distance on a 6371 km sphere; inputs in degrees, broadcastable."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(v, dtype=np.float64)) for v in (lon1, lat1, lon2, lat2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def distance_matrix(regions: Sequence[RegionGeo]) -> np.ndarray:
    """N x N centroid distances in km; zero diagonal, exactly symmetric."""
    if not regions:
        raise DomainError("distance_matrix needs at least one region")
    lon = np.array([r.centroid.lon for r in regions])
    lat = np.array([r.centroid.lat for r in regions])
    d = haversine_km(lon[:, None], lat[:, None], lon[None, :], lat[None, :])
    upper = np.triu(d, k=1)
    return upper + upper.T


def populations(regions: Sequence[RegionGeo]) -> np.ndarray:
    return np.array([r.population for r in regions], dtype=np.float64)
