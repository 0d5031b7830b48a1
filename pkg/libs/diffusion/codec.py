import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import DomainError, UsageError

logger = logging.getLogger(__name__)

# expm1 overflows float64 just above 709.78
MAX_LOG_FLOW = 700.0


@dataclass(frozen=True)
class FlowCodec:
    """
    Maps person counts F to the diffusion value space Z = (log1p(F) - mean) / std.

    ``z_min`` and ``z_max`` are the extremes of the encoded training corpus;
    decoding clips to them so generated flows stay within the range seen in
    training.
    """

    mean: Optional[float] = None
    std: Optional[float] = None
    z_min: Optional[float] = None
    z_max: Optional[float] = None

    @classmethod
    def fit(cls, matrices: Iterable[ODMatrix]) -> "FlowCodec":
        """Statistics of log1p(F) pooled over every edge (diagonal included) of the training corpus."""
        values = [np.log1p(m.F).ravel() for m in matrices]
        if not values:
            raise DomainError("Cannot fit a flow codec on an empty corpus")
        z = np.concatenate(values)
        mean, std = float(z.mean()), float(z.std())
        if std <= 0.0:
            logger.warning("Training flows are constant; flow codec std set to 1")
            std = 1.0
        encoded = (z - mean) / std
        return cls(mean=mean, std=std, z_min=float(encoded.min()), z_max=float(encoded.max()))

    @property
    def fitted(self) -> bool:
        return self.mean is not None and self.std is not None

    @property
    def z_range(self) -> Optional[tuple[float, float]]:
        if self.z_min is None or self.z_max is None:
            return None
        return self.z_min, self.z_max

    def _require_fitted(self) -> None:
        if not self.fitted:
            raise UsageError("Flow codec is not fitted")

    def encode(self, F: np.ndarray) -> np.ndarray:
        self._require_fitted()
        return (np.log1p(np.asarray(F, dtype=np.float64)) - self.mean) / self.std

    def clip(self, Z: np.ndarray) -> np.ndarray:
        """Z limited to the training range (unchanged when the codec carries none)."""
        Z = np.asarray(Z, dtype=np.float64)
        if self.z_range is None:
            return Z
        return np.clip(Z, self.z_min, self.z_max)

    def to_flows(self, Z: np.ndarray) -> np.ndarray:
        """Continuous person counts, clamped at zero (no rounding); finite unless Z holds NaN."""
        self._require_fitted()
        log_flows = np.minimum(self.clip(Z) * self.std + self.mean, MAX_LOG_FLOW)
        return np.maximum(np.expm1(log_flows), 0.0)

    def decode(self, Z: np.ndarray) -> np.ndarray:
        return np.rint(self.to_flows(Z))


def encode_flows(F: ODMatrix, codec: FlowCodec) -> np.ndarray:
    return codec.encode(F.F)


def decode_flows(Z: np.ndarray, codec: FlowCodec, region_ids: tuple[str, ...]) -> ODMatrix:
    """Rounded, non-negative flows labelled with ``region_ids``."""
    return ODMatrix(tuple(region_ids), codec.decode(Z))
