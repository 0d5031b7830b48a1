from dataclasses import dataclass
from typing import Sequence

import numpy as np

from libs.errors import DomainError, ShapeError, ValidationError


@dataclass(frozen=True)
class ODMatrix:
    """F[i, j] = persons living in ``region_ids[i]`` and working in ``region_ids[j]``."""

    region_ids: tuple[str, ...]
    F: np.ndarray

    def __post_init__(self) -> None:
        F = np.array(self.F, dtype=np.float64, copy=True)
        n = len(self.region_ids)
        if F.shape != (n, n):
            raise ShapeError(f"OD matrix is {F.shape} for {n} regions")
        if not np.all(np.isfinite(F)):
            raise DomainError("OD matrix has non-finite flows")
        if np.any(F < 0):
            raise DomainError("OD matrix has negative flows")
        if len(set(self.region_ids)) != n:
            raise ValidationError("OD matrix has duplicate region ids")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "region_ids", tuple(self.region_ids))

    @property
    def n_regions(self) -> int:
        return len(self.region_ids)

    @property
    def total(self) -> float:
        return float(self.F.sum())

    def permuted(self, order: Sequence[int]) -> "ODMatrix":
        order = np.asarray(order)
        return ODMatrix(tuple(self.region_ids[i] for i in order), self.F[np.ix_(order, order)])

    def reindexed(self, region_ids: Sequence[str]) -> "ODMatrix":
        """The same flows laid out in ``region_ids`` order (same id set required)."""
        if set(region_ids) != set(self.region_ids) or len(region_ids) != self.n_regions:
            unknown = sorted(set(region_ids) ^ set(self.region_ids))
            raise ValidationError(f"Region ids differ between OD matrices: {unknown}")
        position = {rid: k for k, rid in enumerate(self.region_ids)}
        return self.permuted([position[rid] for rid in region_ids])
