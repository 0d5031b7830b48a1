"""Closed-form forward noising and the reverse-step mean."""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from libs.diffusion.schedule import NoiseSchedule


class ReverseVariance(str, Enum):
    # sigma_t^2 = 1 - alpha_bar_t
    MARGINAL = "marginal"
    # sigma_t^2 = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
    POSTERIOR = "posterior"


def forward_sample(
    z0: np.ndarray, t: int, schedule: NoiseSchedule, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Z_t = sqrt(alpha_bar_t) Z_0 + sqrt(1 - alpha_bar_t) eps; returns (Z_t, eps)."""
    alpha_bar = schedule.alpha_bar_at(schedule.check_step(t))
    eps = rng.standard_normal(np.shape(z0))
    return np.sqrt(alpha_bar) * z0 + np.sqrt(1.0 - alpha_bar) * eps, eps


def posterior_mean(zt: np.ndarray, eps: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """(Z_t - beta_t / sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_t)."""
    beta = schedule.beta_at(t)
    alpha_bar = schedule.alpha_bar_at(t)
    return (zt - beta / np.sqrt(1.0 - alpha_bar) * eps) / np.sqrt(1.0 - beta)


def predicted_z0(zt: np.ndarray, eps: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """The clean value implied by a noise estimate: (Z_t - sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_bar_t)."""
    alpha_bar = schedule.alpha_bar_at(t)
    return (zt - np.sqrt(1.0 - alpha_bar) * eps) / np.sqrt(alpha_bar)


def posterior_mean_from_z0(zt: np.ndarray, z0: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """
    Mean of q(Z_{t-1} | Z_t, Z_0).

    Equals :func:`posterior_mean` when ``z0`` is :func:`predicted_z0` of the same
    noise estimate; at t = 1 it is ``z0`` itself.
    """
    beta = schedule.beta_at(t)
    alpha_bar = schedule.alpha_bar_at(t)
    alpha_bar_prev = schedule.alpha_bar_at(t - 1)
    z0_coef = np.sqrt(alpha_bar_prev) * beta / (1.0 - alpha_bar)
    zt_coef = np.sqrt(1.0 - beta) * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    return z0_coef * z0 + zt_coef * zt


def reverse_std(t: int, schedule: NoiseSchedule, variance: ReverseVariance) -> float:
    if variance == ReverseVariance.POSTERIOR:
        return float(np.sqrt(schedule.posterior_variance(t)))
    return float(np.sqrt(1.0 - schedule.alpha_bar_at(t)))


@dataclass(frozen=True)
class ReverseNoise:
    """
    Every Gaussian draw one reverse chain consumes.

    ``initial`` is Z_T; ``steps[t - 1]`` is added when moving from step t to
    t - 1. ``steps[0]`` exists for uniform indexing but is never used because
    the last step is noiseless.
    """

    initial: np.ndarray
    steps: np.ndarray

    def permuted(self, order: Sequence[int]) -> "ReverseNoise":
        order = np.asarray(order)
        return ReverseNoise(
            initial=self.initial[np.ix_(order, order)],
            steps=self.steps[:, order][:, :, order],
        )


def draw_reverse_noise(rng: np.random.Generator, schedule: NoiseSchedule, n: int) -> ReverseNoise:
    draws = rng.standard_normal((schedule.T + 1, n, n))
    return ReverseNoise(initial=draws[0], steps=draws[1:])
