"""Noise schedules: beta_t, alpha_t = 1 - beta_t and alpha_bar_t = prod(alpha_1..alpha_t)."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from libs.errors import DomainError

# Reference beta range for a 1000-step linear schedule.
REFERENCE_STEPS = 1000
REFERENCE_BETA_MIN = 1e-4
REFERENCE_BETA_MAX = 0.02
COSINE_OFFSET = 0.008
MAX_BETA = 0.999
COSINE_MIN_BETA = 1e-8


class ScheduleKind(str, Enum):
    LINEAR = "linear"
    COSINE = "cosine"


@dataclass(frozen=True)
class NoiseSchedule:
    """
    ``beta[t - 1]`` is beta_t for t = 1..T; ``alpha_bar_at(0)`` is 1.
    """

    beta: np.ndarray

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=np.float64, copy=True)
        if beta.ndim != 1 or beta.size == 0:
            raise DomainError("A schedule needs at least one step")
        if not np.all((beta > 0) & (beta < 1)):
            raise DomainError("Every beta_t must lie in (0, 1)")
        alpha_bar = np.cumprod(1.0 - beta)
        if np.any(np.diff(alpha_bar) >= 0) or alpha_bar[-1] <= 0:
            raise DomainError("alpha_bar must be strictly decreasing and positive")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def T(self) -> int:
        return int(self.beta.shape[0])

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    def check_step(self, t: int) -> int:
        if not 1 <= t <= self.T:
            raise DomainError(f"Diffusion step t={t} outside [1, {self.T}]")
        return int(t)

    def beta_at(self, t: int) -> float:
        return float(self.beta[self.check_step(t) - 1])

    def alpha_at(self, t: int) -> float:
        return 1.0 - self.beta_at(t)

    def alpha_bar_at(self, t: int) -> float:
        if t == 0:
            return 1.0
        return float(self.alpha_bar[self.check_step(t) - 1])

    def posterior_variance(self, t: int) -> float:
        """beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t); zero at t = 1."""
        return self.beta_at(t) * (1.0 - self.alpha_bar_at(t - 1)) / (1.0 - self.alpha_bar_at(t))


def default_beta_range(T: int) -> tuple[float, float]:
    """The reference 1000-step range rescaled so that T steps destroy a similar amount of signal."""
    scale = REFERENCE_STEPS / T
    return min(REFERENCE_BETA_MIN * scale, MAX_BETA), min(REFERENCE_BETA_MAX * scale, MAX_BETA)


def make_schedule(
    T: int,
    kind: Union[ScheduleKind, str] = ScheduleKind.LINEAR,
    beta_min: Optional[float] = None,
    beta_max: Optional[float] = None,
) -> NoiseSchedule:
    """
    Build a noise schedule.

    Args:
        T: Number of diffusion steps (>= 1)
        kind: ``linear`` interpolates beta_min..beta_max; ``cosine`` follows a squared-cosine
            alpha_bar curve with betas clipped into [beta_min, beta_max]
        beta_min: Smallest beta; linear default is the rescaled reference range
        beta_max: Largest beta; cosine default is 0.999

    Returns:
        NoiseSchedule
    """
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")
    try:
        kind = ScheduleKind(kind)
    except ValueError as e:
        raise DomainError(f"Unknown schedule kind {kind!r}") from e
    if kind == ScheduleKind.LINEAR:
        default_min, default_max = default_beta_range(T)
    else:
        default_min, default_max = COSINE_MIN_BETA, MAX_BETA
    beta_min = default_min if beta_min is None else float(beta_min)
    beta_max = default_max if beta_max is None else float(beta_max)
    if not 0 < beta_min <= beta_max < 1:
        raise DomainError(f"Need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]")

    if kind == ScheduleKind.LINEAR:
        beta = np.linspace(beta_min, beta_max, T)
    else:
        steps = np.arange(T + 1) / T
        f = np.cos((steps + COSINE_OFFSET) / (1 + COSINE_OFFSET) * np.pi / 2) ** 2
        alpha_bar = f / f[0]
        beta = np.clip(1.0 - alpha_bar[1:] / alpha_bar[:-1], beta_min, beta_max)
    return NoiseSchedule(beta=beta)
