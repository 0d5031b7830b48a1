import logging
from typing import Optional, Sequence, Union

import numpy as np

from libs.diffusion.codec import FlowCodec
from libs.diffusion.denoiser import GraphDenoiser, predict_noise
from libs.diffusion.odmatrix import ODMatrix
from libs.diffusion.process import (
    ReverseNoise,
    ReverseVariance,
    draw_reverse_noise,
    posterior_mean,
    posterior_mean_from_z0,
    predicted_z0,
    reverse_std,
)
from libs.diffusion.schedule import NoiseSchedule
from libs.errors import DomainError, ShapeError, UsageError
from libs.features.conditions import ConditionSet

logger = logging.getLogger(__name__)


def reverse_chain(
    model: GraphDenoiser,
    cond: ConditionSet,
    schedule: NoiseSchedule,
    noise: ReverseNoise,
    variance: Union[ReverseVariance, str] = ReverseVariance.POSTERIOR,
    clip_range: Optional[tuple[float, float]] = None,
) -> np.ndarray:
    """
    Run Z_T -> Z_0 with the given draws; the final step adds no noise.

    With ``clip_range`` the clean estimate implied by each noise prediction is
    clipped to it before the step mean is formed, which keeps the chain bounded.
    """
    variance = ReverseVariance(variance)
    n = cond.n_regions
    if noise.initial.shape != (n, n) or noise.steps.shape != (schedule.T, n, n):
        raise ShapeError(f"Reverse noise does not fit {n} regions and {schedule.T} steps")
    z = np.array(noise.initial, dtype=np.float64)
    for t in range(schedule.T, 0, -1):
        eps_hat = predict_noise(model, z, t, cond)
        if clip_range is None:
            z = posterior_mean(z, eps_hat, t, schedule)
        else:
            z0_hat = np.clip(predicted_z0(z, eps_hat, t, schedule), *clip_range)
            z = posterior_mean_from_z0(z, z0_hat, t, schedule)
        if t > 1:
            z = z + reverse_std(t, schedule, variance) * noise.steps[t - 1]
    return z


def generate(
    model: GraphDenoiser,
    codec: FlowCodec,
    cond: ConditionSet,
    schedule: NoiseSchedule,
    rng: Optional[np.random.Generator] = None,
    variance: Union[ReverseVariance, str] = ReverseVariance.POSTERIOR,
    n_samples: int = 1,
    noise: Optional[Sequence[ReverseNoise]] = None,
) -> ODMatrix:
    """
    Sample an OD matrix for the regions of ``cond``.

    Args:
        model: Trained denoiser
        codec: Flow codec of the training corpus
        cond: Condition set (standardized with the training feature statistics)
        schedule: Schedule the model was trained with
        rng: Source of the reverse-chain draws (required unless ``noise`` is given)
        variance: Reverse-step variance rule (posterior by default; marginal uses 1 - alpha_bar_t)
        n_samples: Independent chains whose continuous flows are averaged before rounding
        noise: Explicit draws, one ReverseNoise per chain

    Returns:
        ODMatrix with non-negative integer flows, rows/columns in ``cond.region_ids`` order
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if not codec.fitted:
        raise UsageError("Flow codec is not fitted")
    model.check_inputs(np.zeros((cond.n_regions, cond.n_regions)), cond)
    if noise is None:
        if rng is None:
            raise DomainError("generate needs an rng or explicit noise")
        noise = [draw_reverse_noise(rng, schedule, cond.n_regions) for _ in range(n_samples)]
    elif len(noise) != n_samples:
        raise ShapeError(f"Got {len(noise)} noise sets for {n_samples} samples")

    flows = np.zeros((cond.n_regions, cond.n_regions))
    for k, chain_noise in enumerate(noise):
        z0 = reverse_chain(model, cond, schedule, chain_noise, variance, clip_range=codec.z_range)
        flows += codec.to_flows(z0)
        logger.debug(f"Chain {k + 1}/{n_samples} done")
    return ODMatrix(cond.region_ids, np.rint(flows / n_samples))
