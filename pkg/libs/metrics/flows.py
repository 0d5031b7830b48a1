"""
Flow-matrix comparison metrics.

Inputs are reference ``F`` and generated ``F_hat`` of equal shape. Square
matrices may drop their diagonal with ``include_diagonal=False``; any other
shape is compared entry by entry.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import rankdata

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import DomainError, ShapeError, UndefinedMetricError, UsageError

FlowsLike = Union[ODMatrix, np.ndarray]


def _values(F: FlowsLike) -> np.ndarray:
    return np.asarray(F.F if isinstance(F, ODMatrix) else F, dtype=np.float64)


def pair_values(F: FlowsLike, F_hat: FlowsLike, include_diagonal: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (reference, generated) values over the compared region pairs."""
    a, b = _values(F), _values(F_hat)
    if a.shape != b.shape:
        raise ShapeError(f"Flow matrices differ in shape: {a.shape} vs {b.shape}")
    if not include_diagonal and a.ndim == 2 and a.shape[0] == a.shape[1]:
        keep = ~np.eye(a.shape[0], dtype=bool)
        return a[keep], b[keep]
    return a.ravel(), b.ravel()


def rmse(F: FlowsLike, F_hat: FlowsLike, include_diagonal: bool = True) -> float:
    a, b = pair_values(F, F_hat, include_diagonal)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def nrmse(F: FlowsLike, F_hat: FlowsLike, include_diagonal: bool = True) -> float:
    """RMSE divided by the (population) standard deviation of the reference flows."""
    a, b = pair_values(F, F_hat, include_diagonal)
    spread = float(np.sqrt(np.mean((a - a.mean()) ** 2)))
    if spread == 0.0:
        raise UndefinedMetricError("NRMSE is undefined for a constant reference matrix")
    return float(np.sqrt(np.mean((a - b) ** 2))) / spread


def cpc(F: FlowsLike, F_hat: FlowsLike, include_diagonal: bool = True) -> float:
    """Common part of commuting: 2 sum(min(F, F_hat)) / (sum(F) + sum(F_hat))."""
    a, b = pair_values(F, F_hat, include_diagonal)
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("CPC needs non-negative flows")
    total = float(a.sum() + b.sum())
    if total == 0.0:
        raise UndefinedMetricError("CPC is undefined when both matrices are all zero")
    return min(1.0, 2.0 * float(np.minimum(a, b).sum()) / total)


def spearman(F: FlowsLike, F_hat: FlowsLike, include_diagonal: bool = True) -> float:
    """Pearson correlation of average ranks."""
    a, b = pair_values(F, F_hat, include_diagonal)
    if a.size < 2:
        raise DomainError("Spearman correlation needs at least two pairs")
    ra = rankdata(a, method="average")
    rb = rankdata(b, method="average")
    xa = ra - ra.mean()
    xb = rb - rb.mean()
    denominator = float(np.sqrt((xa * xa).sum() * (xb * xb).sum()))
    if denominator == 0.0:
        raise UndefinedMetricError("Spearman correlation is undefined for a constant input")
    return float(np.clip((xa * xb).sum() / denominator, -1.0, 1.0))


@dataclass(frozen=True)
class RankCurve:
    reference: np.ndarray
    generated: np.ndarray


def default_window(n: int) -> int:
    return min(n, max(3, n // 200))


def _minmax(values: np.ndarray) -> np.ndarray:
    low, high = values.min(), values.max()
    if high == low:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks at both ends."""
    n = values.shape[0]
    if window < 1 or window > n:
        raise UsageError(f"Smoothing window {window} outside [1, {n}]")
    if window == 1:
        return values.copy()
    left = (window - 1) // 2
    right = window // 2
    index = np.arange(n)
    start = np.maximum(index - left, 0)
    stop = np.minimum(index + right, n - 1) + 1
    cumulative = np.concatenate([[0.0], np.cumsum(values)])
    return (cumulative[stop] - cumulative[start]) / (stop - start)


def rank_curve(
    F_ref: FlowsLike,
    F_gen: FlowsLike,
    smoothing_window: Optional[int] = None,
    include_diagonal: bool = True,
) -> RankCurve:
    """
    Reference flows sorted ascending, generated flows in the same order, both
    min-max normalized to [0, 1] and smoothed.
    """
    a, b = pair_values(F_ref, F_gen, include_diagonal)
    if a.size == 0:
        raise DomainError("Rank curve needs at least one pair")
    window = default_window(a.size) if smoothing_window is None else smoothing_window
    order = np.argsort(a, kind="stable")
    return RankCurve(
        reference=moving_average(_minmax(a[order]), window),
        generated=moving_average(_minmax(b[order]), window),
    )
