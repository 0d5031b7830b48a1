"""Validators for odflow inputs."""

from .flow_validators import validate_flow, validate_od_pair
from .region_validators import validate_id_coverage, validate_population, validate_region_id

__all__ = [
    "validate_flow",
    "validate_od_pair",
    "validate_id_coverage",
    "validate_population",
    "validate_region_id",
]
