"""Region conditioning vectors (embedding plus population) and the per-city condition set."""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from libs.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

# Columns whose spread is below this are treated as constant.
CONSTANT_STD = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RegionFeature:
    region_id: str
    embedding: np.ndarray
    population: float

    def __post_init__(self) -> None:
        embedding = np.asarray(self.embedding, dtype=np.float64)
        if embedding.ndim != 1 or embedding.size == 0:
            raise ShapeError(f"Embedding of {self.region_id!r} must be a non-empty vector")
        if not np.all(np.isfinite(embedding)):
            raise DomainError(f"Embedding of {self.region_id!r} has non-finite entries")
        if not np.isfinite(self.population) or self.population < 0:
            raise DomainError(f"Population of {self.region_id!r} must be finite and >= 0")
        object.__setattr__(self, "embedding", _frozen(embedding))
        object.__setattr__(self, "population", float(self.population))

    @property
    def dimension(self) -> int:
        return int(self.embedding.shape[0])


@dataclass(frozen=True)
class FeatureStats:
    """Per-column mean/std of the raw condition matrix; std 0 marks a constant column."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean, std = _frozen(self.mean), _frozen(self.std)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ShapeError("Feature stats mean/std must be vectors of equal length")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def width(self) -> int:
        return int(self.mean.shape[0])

    def standardize(self, raw: np.ndarray) -> np.ndarray:
        if raw.shape[1] != self.width:
            raise ShapeError(f"Condition rows have {raw.shape[1]} columns, stats expect {self.width}")
        scale = np.where(self.std > 0, self.std, 1.0)
        standardized = (raw - self.mean) / scale
        standardized[:, self.std == 0] = 0.0
        return standardized


@dataclass(frozen=True)
class ConditionSet:
    """
    Conditions for one city: rows of X follow ``region_ids``.

    ``distances`` (km, N x N) feeds the denoiser's pairwise distance channel;
    it is optional so that feature-only conditioning can be tested in
    isolation.
    """

    region_ids: tuple[str, ...]
    X: np.ndarray
    stats: FeatureStats
    distances: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        X = _frozen(self.X)
        if X.ndim != 2 or X.shape[0] != len(self.region_ids):
            raise ShapeError(f"X has shape {X.shape} for {len(self.region_ids)} regions")
        if not np.all(np.isfinite(X)):
            raise DomainError("Condition matrix has non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "region_ids", tuple(self.region_ids))
        if self.distances is not None:
            distances = _frozen(self.distances)
            n = len(self.region_ids)
            if distances.shape != (n, n):
                raise ShapeError(f"Distance matrix is {distances.shape}, expected {(n, n)}")
            object.__setattr__(self, "distances", distances)

    @property
    def n_regions(self) -> int:
        return len(self.region_ids)

    @property
    def width(self) -> int:
        return int(self.X.shape[1])

    def permuted(self, order: Sequence[int]) -> "ConditionSet":
        """Rows reordered so that new row k is old row ``order[k]``."""
        order = np.asarray(order)
        distances = None if self.distances is None else self.distances[np.ix_(order, order)]
        return ConditionSet(
            region_ids=tuple(self.region_ids[i] for i in order),
            X=self.X[order],
            stats=self.stats,
            distances=distances,
        )

    def shuffled_embeddings(self, rng: np.random.Generator) -> "ConditionSet":
        """Ablation: embedding columns shuffled across regions, population column kept."""
        X = np.array(self.X)
        X[:, :-1] = X[rng.permutation(self.n_regions), :-1]
        return replace(self, X=X)


def raw_condition_matrix(features: Sequence[RegionFeature]) -> np.ndarray:
    """Unstandardized rows: the embedding followed by log1p(population)."""
    if not features:
        raise DomainError("At least one region feature is required")
    dims = {f.dimension for f in features}
    if len(dims) != 1:
        raise ShapeError(f"Region embeddings have mixed dimensions {sorted(dims)}")
    return np.stack(
        [np.concatenate([f.embedding, [np.log1p(f.population)]]) for f in features]
    )


def fit_feature_stats(features: Sequence[RegionFeature]) -> FeatureStats:
    """Column statistics over a (possibly pooled, multi-city) set of regions."""
    raw = raw_condition_matrix(features)
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    constant = std <= CONSTANT_STD * np.maximum(1.0, np.abs(mean))
    if constant.any() and len(features) > 1:
        logger.warning(f"{int(constant.sum())} constant condition column(s) mapped to zero")
    std = np.where(constant, 0.0, std)
    return FeatureStats(mean=mean, std=std)


def build_conditions(
    features: Sequence[RegionFeature],
    stats: Optional[FeatureStats] = None,
    distances: Optional[np.ndarray] = None,
) -> ConditionSet:
    """
    X[i] = [standardize(E_i), standardize(log1p(P_i))].

    Without ``stats`` the statistics are fitted on ``features`` themselves;
    generation passes the statistics recorded at training time.
    """
    raw = raw_condition_matrix(features)
    if stats is None:
        stats = fit_feature_stats(features)
    return ConditionSet(
        region_ids=tuple(f.region_id for f in features),
        X=stats.standardize(raw),
        stats=stats,
        distances=distances,
    )
