"""
Parameter-free radiation model:

    T_ij = O_i * m_i m_j / ((m_i + s_ij) (m_i + m_j + s_ij))

where s_ij is the population strictly closer to i than j is, excluding i and j.
"""

from typing import Optional, Sequence

import numpy as np

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import DomainError, ShapeError
from libs.physical.distance import RegionGeo, distance_matrix, populations

DEFAULT_TRIP_RATE = 0.5


def intervening_population(distances: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """
    s[i, j] = sum of m_k over k not in {i, j} with d[i, k] < d[i, j]; s[i, i] = 0.

    Regions exactly on the circle (d[i, k] == d[i, j]) are not counted.
    """
    d = np.asarray(distances, dtype=np.float64)
    m = np.asarray(masses, dtype=np.float64)
    n = m.shape[0]
    if d.shape != (n, n):
        raise ShapeError(f"Distances are {d.shape} for {n} populations")
    s = np.zeros((n, n))
    for i in range(n):
        others = m.copy()
        others[i] = 0.0
        order = np.argsort(d[i], kind="stable")
        sorted_d = d[i][order]
        prefix = np.concatenate([[0.0], np.cumsum(others[order])])
        closer = np.searchsorted(sorted_d, d[i], side="left")
        s[i] = prefix[closer]
        s[i, i] = 0.0
    return s


def radiation(
    regions: Sequence[RegionGeo],
    outflow: Optional[np.ndarray] = None,
    trip_rate: float = DEFAULT_TRIP_RATE,
    distances: Optional[np.ndarray] = None,
    renormalize: bool = False,
) -> ODMatrix:
    """
    Radiation-model flows between ``regions``.

    Args:
        regions: Region centroids and populations
        outflow: O_i per region; defaults to population times ``trip_rate``
        trip_rate: Trips per person used for the default outflow
        distances: Precomputed N x N km matrix; computed from centroids when omitted
        renormalize: Scale each row to sum exactly to O_i

    Returns:
        ODMatrix in ``regions`` order with a zero diagonal
    """
    m = populations(regions)
    n = m.shape[0]
    if outflow is None:
        if trip_rate < 0:
            raise DomainError("trip_rate must be >= 0")
        outflow = m * trip_rate
    outflow = np.asarray(outflow, dtype=np.float64)
    if outflow.shape != (n,):
        raise ShapeError(f"Outflow has shape {outflow.shape} for {n} regions")
    if np.any(outflow < 0) or not np.all(np.isfinite(outflow)):
        raise DomainError("Outflows must be finite and >= 0")
    if distances is None:
        distances = distance_matrix(regions)

    s = intervening_population(distances, m)
    mi = m[:, None]
    mj = m[None, :]
    denominator = (mi + s) * (mi + mj + s)
    share = np.divide(mi * mj, denominator, out=np.zeros((n, n)), where=denominator > 0)
    np.fill_diagonal(share, 0.0)
    share[m == 0, :] = 0.0
    flows = outflow[:, None] * share

    if renormalize:
        row_sums = flows.sum(axis=1, keepdims=True)
        flows = np.divide(flows * outflow[:, None], row_sums, out=np.zeros_like(flows), where=row_sums > 0)
    return ODMatrix(tuple(r.region_id for r in regions), flows)
