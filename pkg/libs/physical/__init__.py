from libs.physical.distance import EARTH_RADIUS_KM, RegionGeo, distance_matrix, haversine_km
from libs.physical.gravity import GravityParams, fit_gravity, gravity
from libs.physical.radiation import intervening_population, radiation

__all__ = [
    "EARTH_RADIUS_KM",
    "GravityParams",
    "RegionGeo",
    "distance_matrix",
    "fit_gravity",
    "gravity",
    "haversine_km",
    "intervening_population",
    "radiation",
]
