"""Power-law gravity model F_ij = G m_i m_j / d_ij^beta and its least-squares fit."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import DomainError, UndefinedMetricError
from libs.metrics.flows import nrmse
from libs.physical.distance import RegionGeo, distance_matrix, populations

logger = logging.getLogger(__name__)

MIN_DISTANCE_KM = 0.1
DEFAULT_BETAS = (0.5, 1.0, 1.5, 2.0)

GravityFitCity = tuple[Sequence[RegionGeo], ODMatrix]


@dataclass(frozen=True)
class GravityParams:
    G: float = 1.0
    beta: float = 2.0
    nrmse: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise DomainError(f"Gravity exponent must be > 0, got {self.beta}")
        if not self.G >= 0:
            raise DomainError(f"Gravity constant must be >= 0, got {self.G}")


def floored_distances(distances: np.ndarray) -> np.ndarray:
    """Off-diagonal distances below 0.1 km (coincident centroids) are raised to 0.1 km."""
    d = np.array(distances, dtype=np.float64)
    off_diagonal = ~np.eye(d.shape[0], dtype=bool)
    close = off_diagonal & (d < MIN_DISTANCE_KM)
    if close.any():
        logger.warning(f"{int(close.sum())} ordered region pair(s) closer than {MIN_DISTANCE_KM} km; distance floored")
    return np.where(off_diagonal, np.maximum(d, MIN_DISTANCE_KM), 0.0)


def gravity_kernel(masses: np.ndarray, distances: np.ndarray, beta: float) -> np.ndarray:
    """m_i m_j / d_ij^beta with a zero diagonal (G = 1)."""
    d = floored_distances(distances)
    n = d.shape[0]
    off_diagonal = ~np.eye(n, dtype=bool)
    kernel = np.zeros((n, n))
    kernel[off_diagonal] = (np.outer(masses, masses)[off_diagonal]) / d[off_diagonal] ** beta
    return kernel


def gravity(
    regions: Sequence[RegionGeo],
    params: GravityParams,
    distances: Optional[np.ndarray] = None,
    total_trips: Optional[float] = None,
) -> ODMatrix:
    """
    Gravity-model flows between ``regions``.

    Args:
        regions: Region centroids and populations
        params: G and beta
        distances: Precomputed N x N km matrix; computed from centroids when omitted
        total_trips: When given, flows are rescaled so that they sum to this value

    Returns:
        ODMatrix in ``regions`` order with a zero diagonal
    """
    if distances is None:
        distances = distance_matrix(regions)
    flows = params.G * gravity_kernel(populations(regions), distances, params.beta)
    if total_trips is not None:
        total = flows.sum()
        if total > 0:
            flows = flows * (float(total_trips) / total)
    return ODMatrix(tuple(r.region_id for r in regions), flows)


def fit_gravity(cities: Sequence[GravityFitCity], betas: Sequence[float] = DEFAULT_BETAS) -> GravityParams:
    """
    Grid search over ``betas``; for each beta, G is the pooled least-squares
    solution sum(F K) / sum(K^2). The pair with the lowest mean NRMSE wins.
    """
    if not cities:
        raise DomainError("fit_gravity needs at least one city")
    prepared = []
    for regions, reference in cities:
        ids = tuple(r.region_id for r in regions)
        reference = reference.reindexed(ids) if reference.region_ids != ids else reference
        prepared.append((populations(regions), distance_matrix(regions), reference.F))

    best: Optional[GravityParams] = None
    for beta in betas:
        kernels = [gravity_kernel(m, d, beta) for m, d, _ in prepared]
        numerator = sum(float((K * F).sum()) for K, (_, _, F) in zip(kernels, prepared))
        denominator = sum(float((K * K).sum()) for K in kernels)
        G = numerator / denominator if denominator > 0 else 0.0
        scores = []
        for K, (_, _, F) in zip(kernels, prepared):
            try:
                scores.append(nrmse(F, G * K))
            except UndefinedMetricError:
                continue
        if not scores:
            raise DomainError("Every fitting city has constant reference flows")
        candidate = GravityParams(G=G, beta=float(beta), nrmse=float(np.mean(scores)))
        logger.debug(f"Gravity beta={beta}: G={G:.4g}, mean NRMSE={candidate.nrmse:.4f}")
        if best is None or candidate.nrmse < best.nrmse:
            best = candidate
    logger.info(f"Fitted gravity model: G={best.G:.4g}, beta={best.beta}, mean NRMSE={best.nrmse:.4f}")
    return best
