"""
Synthetic cities drawn from a known latent process.

Every region carries a latent vector. Its productiveness and attractiveness
are log-linear in that vector, its embedding is a fixed linear map of it plus
noise, and the ground-truth flows follow an exponential-decay kernel::

    F_ij = round(scale * p_i * pop_i^gamma * a_j * exp(-d_ij / d0) * eta_ij)

with eta mean-one log-normal noise.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import DomainError, UsageError
from libs.features.conditions import RegionFeature
from libs.geo.boundaries import RegionBoundary, square_boundary
from libs.ingest.city import CityBundle
from libs.physical.distance import EARTH_RADIUS_KM, RegionGeo, distance_matrix
from libs.synth.config import SynthConfig
from libs.utils.rng import stream

logger = logging.getLogger(__name__)

KM_PER_DEGREE = EARTH_RADIUS_KM * math.pi / 180.0
MAX_ABS_LATITUDE = 50.0
MAX_ABS_LONGITUDE = 150.0


@dataclass(frozen=True)
class LatentMap:
    """Corpus-wide maps from the latent space: embedding matrix and the two signal axes."""

    W: np.ndarray  # (feature_dim, latent_dim)
    productiveness_axis: np.ndarray  # unit vector, (latent_dim,)
    attractiveness_axis: np.ndarray  # unit vector, (latent_dim,)


def latent_map(cfg: SynthConfig) -> LatentMap:
    rng = stream(cfg.seed, "synth")
    W = rng.standard_normal((cfg.feature_dim, cfg.latent_dim)) / math.sqrt(cfg.latent_dim)
    axes = rng.standard_normal((2, cfg.latent_dim))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return LatentMap(W=W, productiveness_axis=axes[0], attractiveness_axis=axes[1])


@dataclass
class SynthCity:
    city_id: str
    index: int
    boundaries: list[RegionBoundary]
    geos: list[RegionGeo]
    features: list[RegionFeature]
    od: ODMatrix
    latent: np.ndarray
    productiveness: np.ndarray
    attractiveness: np.ndarray

    @property
    def region_ids(self) -> tuple[str, ...]:
        return self.od.region_ids

    @property
    def n_regions(self) -> int:
        return len(self.boundaries)

    @property
    def populations(self) -> dict[str, float]:
        return {g.region_id: g.population for g in self.geos}

    def embeddings(self) -> dict[str, np.ndarray]:
        return {f.region_id: f.embedding for f in self.features}

    def to_bundle(self) -> CityBundle:
        return CityBundle(
            name=self.city_id,
            boundaries=list(self.boundaries),
            geos=list(self.geos),
            features=list(self.features),
            od=self.od,
        )


def latent_flows(
    populations: np.ndarray,
    distances: np.ndarray,
    productiveness: np.ndarray,
    attractiveness: np.ndarray,
    flow_scale: float = 0.05,
    pop_exponent: float = 1.0,
    decay_km: float = 3.0,
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Ground-truth flows of the synthetic kernel, rounded to non-negative integers.

    Args:
        populations: (N,) region populations
        distances: (N, N) centroid distances in km
        productiveness: (N,) origin factors p_i > 0
        attractiveness: (N,) destination factors a_j > 0
        flow_scale: Overall scale (lambda)
        pop_exponent: Exponent on the origin population
        decay_km: Distance decay length d0
        noise: Log-sd of the multiplicative mean-one noise
        rng: Generator for the noise; required when ``noise > 0``

    Returns:
        (N, N) float array of integer values
    """
    populations = np.asarray(populations, dtype=np.float64)
    distances = np.asarray(distances, dtype=np.float64)
    n = populations.shape[0]
    if distances.shape != (n, n):
        raise DomainError(f"Distance matrix is {distances.shape} for {n} regions")
    if np.any(populations < 0) or np.any(distances < 0):
        raise DomainError("Populations and distances must be non-negative")

    mean = (
        flow_scale
        * (np.asarray(productiveness) * populations**pop_exponent)[:, None]
        * np.asarray(attractiveness)[None, :]
        * np.exp(-distances / decay_km)
    )
    if noise > 0:
        if rng is None:
            raise UsageError("latent_flows needs a random generator when noise > 0")
        eta = np.exp(noise * rng.standard_normal((n, n)) - 0.5 * noise**2)
        mean = mean * eta
    return np.rint(mean)


def _grid_boundaries(cfg: SynthConfig, city_id: str, n: int, rng: np.random.Generator) -> list[RegionBoundary]:
    """Jittered axis-aligned cells on a ceil(sqrt(n))-wide grid."""
    lat0 = rng.uniform(-MAX_ABS_LATITUDE, MAX_ABS_LATITUDE)
    lon0 = rng.uniform(-MAX_ABS_LONGITUDE, MAX_ABS_LONGITUDE)
    cols = math.ceil(math.sqrt(n))
    deg_lat = cfg.cell_km / KM_PER_DEGREE
    deg_lon = deg_lat / math.cos(math.radians(lat0))
    # Each side moves inwards by up to jitter/2 of a cell, so cells never overlap.
    shrink = rng.uniform(0.0, cfg.jitter / 2, size=(n, 4))

    boundaries = []
    for k in range(n):
        row, col = divmod(k, cols)
        boundaries.append(
            square_boundary(
                f"{city_id}-r{k:03d}",
                west=lon0 + (col + shrink[k, 0]) * deg_lon,
                south=lat0 + (row + shrink[k, 1]) * deg_lat,
                east=lon0 + (col + 1 - shrink[k, 2]) * deg_lon,
                north=lat0 + (row + 1 - shrink[k, 3]) * deg_lat,
            )
        )
    return boundaries


def generate_city(cfg: SynthConfig, index: int, latent: Optional[LatentMap] = None) -> SynthCity:
    """
    Draw city ``index`` of the corpus; the result depends only on (cfg, index).

    Args:
        cfg: Corpus configuration
        index: City position in the corpus (0-based)
        latent: Corpus latent map, recomputed from ``cfg`` when omitted

    Returns:
        SynthCity
    """
    if index < 0:
        raise DomainError(f"City index must be >= 0, got {index}")
    latent = latent or latent_map(cfg)
    rng = stream(cfg.seed, "synth", index + 1)
    city_id = f"city{index:03d}"

    n = int(rng.integers(cfg.min_regions, cfg.max_regions + 1))
    boundaries = _grid_boundaries(cfg, city_id, n, rng)

    z = rng.standard_normal((n, cfg.latent_dim))
    populations = np.maximum(1.0, np.rint(rng.lognormal(cfg.population_mu, cfg.population_sigma, n)))
    embeddings = z @ latent.W.T + cfg.embedding_noise * rng.standard_normal((n, cfg.feature_dim))
    productiveness = np.exp(cfg.productiveness_weight * (z @ latent.productiveness_axis))
    attractiveness = np.exp(cfg.attractiveness_weight * (z @ latent.attractiveness_axis))

    geos = [RegionGeo(b.region_id, b.centroid(), populations[k]) for k, b in enumerate(boundaries)]
    features = [RegionFeature(b.region_id, embeddings[k], populations[k]) for k, b in enumerate(boundaries)]
    flows = latent_flows(
        populations,
        distance_matrix(geos),
        productiveness,
        attractiveness,
        flow_scale=cfg.flow_scale,
        pop_exponent=cfg.pop_exponent,
        decay_km=cfg.decay_km,
        noise=cfg.noise,
        rng=rng,
    )
    od = ODMatrix(tuple(b.region_id for b in boundaries), flows)
    logger.debug(f"Generated {city_id}: {n} regions, {od.total:.0f} trips")
    return SynthCity(
        city_id=city_id,
        index=index,
        boundaries=boundaries,
        geos=geos,
        features=features,
        od=od,
        latent=z,
        productiveness=productiveness,
        attractiveness=attractiveness,
    )


def generate_corpus(cfg: SynthConfig) -> list[SynthCity]:
    latent = latent_map(cfg)
    cities = [generate_city(cfg, index, latent) for index in range(cfg.n_cities)]
    logger.info(f"Generated {len(cities)} synthetic cities (seed {cfg.seed})")
    return cities
