"""Region boundaries from/to GeoJSON FeatureCollections (Polygon and MultiPolygon)."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Mapping, Optional, Sequence, Union

import pydantic
from pydantic import BaseModel, ConfigDict

from libs.errors import DomainError, FormatError
from libs.geo.boundaries import PolygonPart, RegionBoundary, Ring
from libs.geo.tilegrid import GeoPoint
from libs.utils.files import atomic_write_text
from libs.validators import validate_population, validate_region_id

logger = logging.getLogger(__name__)

Position = list[float]
LinearRing = list[Position]


class PolygonGeometry(BaseModel):
    type: Literal["Polygon"]
    coordinates: list[LinearRing]


class MultiPolygonGeometry(BaseModel):
    type: Literal["MultiPolygon"]
    coordinates: list[list[LinearRing]]


class RegionFeatureModel(BaseModel):
    type: Literal["Feature"]
    id: Optional[Union[str, int]] = None
    properties: Optional[dict[str, Any]] = None
    geometry: Union[PolygonGeometry, MultiPolygonGeometry] = pydantic.Field(discriminator="type")

    model_config = ConfigDict(extra="allow")


class FeatureCollectionModel(BaseModel):
    type: Literal["FeatureCollection"]
    features: list[RegionFeatureModel]

    model_config = ConfigDict(extra="allow")


@dataclass
class BoundaryFile:
    """Boundaries sorted by region id, plus any ``population`` properties found."""

    boundaries: list[RegionBoundary]
    populations: dict[str, float] = field(default_factory=dict)

    @property
    def region_ids(self) -> list[str]:
        return [b.region_id for b in self.boundaries]


def _ring(coords: LinearRing, path: Path, where: str) -> Ring:
    points = []
    for position in coords:
        if len(position) < 2:
            raise FormatError(f"{where}: position {position} needs longitude and latitude", path)
        try:
            points.append(GeoPoint(lon=float(position[0]), lat=float(position[1])))
        except DomainError as e:
            raise FormatError(f"{where}: {e}", path) from e
    return tuple(points)


def _part(rings: list[LinearRing], path: Path, where: str) -> PolygonPart:
    if not rings:
        raise FormatError(f"{where}: polygon without rings", path)
    return PolygonPart(
        exterior=_ring(rings[0], path, where),
        holes=tuple(_ring(h, path, where) for h in rings[1:]),
    )


def _region_id(feature: RegionFeatureModel) -> Any:
    props = feature.properties or {}
    for key in ("region_id", "id"):
        if key in props:
            value = props[key]
            return str(value) if isinstance(value, int) and not isinstance(value, bool) else value
    return str(feature.id) if isinstance(feature.id, int) else feature.id


def load_boundaries(path: Union[str, Path]) -> BoundaryFile:
    """
    Parse a FeatureCollection whose features carry a region id
    (``properties.region_id``, ``properties.id`` or the feature ``id``).
    """
    path = Path(path)
    if not path.is_file():
        raise FormatError("boundary file not found", path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from e
    except UnicodeDecodeError as e:
        raise FormatError("file is not UTF-8", path) from e

    try:
        collection = FeatureCollectionModel.model_validate(document)
    except pydantic.ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(p) for p in first["loc"])
        raise FormatError(f"not a Polygon/MultiPolygon FeatureCollection ({location}: {first['msg']})", path) from e

    boundaries: dict[str, RegionBoundary] = {}
    populations: dict[str, float] = {}
    for index, feature in enumerate(collection.features):
        region_id = _region_id(feature)
        is_valid, error = validate_region_id(region_id)
        if not is_valid:
            raise FormatError(f"feature {index}: {error}", path)
        if region_id in boundaries:
            raise FormatError(f"duplicate region id {region_id!r}", path)

        where = f"region {region_id!r}"
        if feature.geometry.type == "Polygon":
            parts = [_part(feature.geometry.coordinates, path, where)]
        else:
            parts = [_part(p, path, where) for p in feature.geometry.coordinates]
            if not parts:
                raise FormatError(f"{where}: empty MultiPolygon", path)
        try:
            boundaries[region_id] = RegionBoundary(
                region_id=region_id,
                exterior=parts[0].exterior,
                holes=parts[0].holes,
                extra_parts=tuple(parts[1:]),
            )
        except DomainError as e:
            raise FormatError(str(e), path) from e

        population = (feature.properties or {}).get("population")
        if population is not None:
            is_valid, error = validate_population(population)
            if not is_valid:
                raise FormatError(f"{where}: {error}", path)
            populations[region_id] = float(population)

    if not boundaries:
        raise FormatError("no region features", path)
    ordered = [boundaries[rid] for rid in sorted(boundaries)]
    logger.info(f"Loaded {len(ordered)} region boundaries from {path}")
    return BoundaryFile(boundaries=ordered, populations=populations)


def _coords(ring: Ring) -> list[list[float]]:
    return [[p.lon, p.lat] for p in ring]


def write_boundaries(
    path: Union[str, Path],
    boundaries: Sequence[RegionBoundary],
    populations: Optional[Mapping[str, float]] = None,
) -> Path:
    features = []
    for b in sorted(boundaries, key=lambda b: b.region_id):
        polygons = [[_coords(part.exterior), *(_coords(h) for h in part.holes)] for part in b.parts]
        if len(polygons) == 1:
            geometry = {"type": "Polygon", "coordinates": polygons[0]}
        else:
            geometry = {"type": "MultiPolygon", "coordinates": polygons}
        properties: dict[str, Any] = {"region_id": b.region_id}
        if populations is not None and b.region_id in populations:
            properties["population"] = populations[b.region_id]
        features.append({"type": "Feature", "properties": properties, "geometry": geometry})
    document = FeatureCollectionModel.model_validate({"type": "FeatureCollection", "features": features})
    return atomic_write_text(path, document.model_dump_json(exclude_none=True, indent=1) + "\n")
