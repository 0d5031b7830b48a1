import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from libs.diffusion.artifacts import TrainedModel, save_trained
from libs.diffusion.codec import FlowCodec, encode_flows
from libs.diffusion.denoiser import DenoiserDims, GraphDenoiser
from libs.diffusion.odmatrix import ODMatrix
from libs.diffusion.process import forward_sample
from libs.diffusion.schedule import ScheduleKind, make_schedule
from libs.errors import DomainError, ShapeError, TrainingError
from libs.features.conditions import ConditionSet
from libs.nn import functional as F
from libs.nn.optim import Adam
from libs.nn.tensor import Tensor, no_grad
from libs.utils.rng import stream

logger = logging.getLogger(__name__)

TrainingCity = tuple[ODMatrix, ConditionSet]


class TrainConfig(BaseModel):
    diffusion_steps: int = Field(default=200, alias="t", ge=1)
    schedule: ScheduleKind = ScheduleKind.LINEAR
    beta_min: Optional[float] = Field(default=None, gt=0, lt=1)
    beta_max: Optional[float] = Field(default=None, gt=0, lt=1)
    d_model: int = Field(default=64, ge=1)
    heads: int = Field(default=4, ge=1)
    layers: int = Field(default=3, ge=1)
    d_edge: int = Field(default=16, ge=1)
    time_dim: int = Field(default=32, ge=2)
    lr: float = Field(default=1e-3, ge=0)
    steps: int = Field(default=2000, ge=0)
    seed: int = Field(default=0, ge=0)
    validation_split: float = Field(default=0.1, ge=0, lt=1)
    log_every: int = Field(default=100, ge=1)
    epoch_steps: Optional[int] = Field(default=None, ge=1)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _check_architecture(self) -> "TrainConfig":
        if self.d_model % self.heads:
            raise ValueError(f"d_model={self.d_model} must be divisible by heads={self.heads}")
        if self.time_dim % 2:
            raise ValueError("time_dim must be even")
        return self


def denoising_loss(model: GraphDenoiser, zt: np.ndarray, t: int, cond: ConditionSet, eps: np.ndarray) -> Tensor:
    """MSE between the true noise and the model's prediction."""
    return F.mse(model(zt, t, cond), Tensor(eps))


def _aligned(city: TrainingCity) -> TrainingCity:
    od, cond = city
    if od.region_ids != cond.region_ids:
        od = od.reindexed(cond.region_ids)
    return od, cond


def split_validation(
    corpus: Sequence[TrainingCity], fraction: float, seed: int
) -> tuple[list[TrainingCity], list[TrainingCity]]:
    """Hold out ``round(fraction * n)`` cities (at least one when fraction > 0 and n >= 2)."""
    cities = list(corpus)
    if fraction <= 0 or len(cities) < 2:
        return cities, []
    n_val = min(max(1, int(round(fraction * len(cities)))), len(cities) - 1)
    order = stream(seed, "split").permutation(len(cities))
    held_out = set(order[:n_val].tolist())
    train = [c for k, c in enumerate(cities) if k not in held_out]
    validation = [c for k, c in enumerate(cities) if k in held_out]
    return train, validation


class Trainer:
    """
    Noise-prediction training, one city graph per step.

    Step ``s`` draws its city, diffusion step and noise from the
    ``(seed, "train", s)`` stream, so a run restored from a checkpoint
    continues exactly as the uninterrupted run would have.
    """

    def __init__(
        self,
        corpus: Sequence[TrainingCity],
        config: TrainConfig,
        validation: Sequence[TrainingCity] = (),
        resume: Optional[TrainedModel] = None,
    ):
        if not corpus:
            raise DomainError("Training needs at least one city")
        self.config = config
        self.cities = [_aligned(c) for c in corpus]
        self.validation = [_aligned(c) for c in validation]

        widths = {cond.width for _, cond in self.cities + self.validation}
        if len(widths) != 1:
            raise ShapeError(f"Cities have different condition widths {sorted(widths)}")
        self.feature_stats = self.cities[0][1].stats
        for _, cond in self.cities[1:]:
            if not (
                np.array_equal(cond.stats.mean, self.feature_stats.mean)
                and np.array_equal(cond.stats.std, self.feature_stats.std)
            ):
                logger.warning("Training cities were standardized with different feature statistics")
                break

        if resume is not None:
            self.model = resume.model
            self.codec = resume.codec
            self.schedule = resume.schedule
            self.step_count = resume.step
            if resume.seed != config.seed:
                logger.warning(f"Resuming with seed {config.seed}; checkpoint was trained with {resume.seed}")
            if resume.model.dims.cond_dim != widths.pop():
                raise ShapeError("Checkpoint condition width does not match the corpus")
            self.optimizer = Adam(self.model.parameters(), lr=config.lr, state=resume.adam)
            self.optimizer.state.lr = config.lr
        else:
            self.codec = FlowCodec.fit(od for od, _ in self.cities)
            self.schedule = make_schedule(
                config.diffusion_steps, config.schedule, config.beta_min, config.beta_max
            )
            dims = DenoiserDims(
                cond_dim=widths.pop(),
                d_model=config.d_model,
                heads=config.heads,
                layers=config.layers,
                d_edge=config.d_edge,
                time_dim=config.time_dim,
            )
            self.model = GraphDenoiser(dims, stream(config.seed, "init"))
            self.step_count = 0
            self.optimizer = Adam(self.model.parameters(), lr=config.lr)

        self._z0 = [encode_flows(od, self.codec) for od, _ in self.cities]
        self._val_z0 = [encode_flows(od, self.codec) for od, _ in self.validation]
        self.history: list[float] = []
        self.validation_history: list[float] = []

    @property
    def epoch_steps(self) -> int:
        return self.config.epoch_steps or len(self.cities)

    def step(self) -> float:
        """One optimizer step; returns the training loss before the update."""
        rng = stream(self.config.seed, "train", self.step_count)
        index = int(rng.integers(len(self.cities)))
        t = int(rng.integers(1, self.schedule.T + 1))
        zt, eps = forward_sample(self._z0[index], t, self.schedule, rng)

        self.optimizer.zero_grad()
        loss = denoising_loss(self.model, zt, t, self.cities[index][1], eps)
        value = loss.item()
        if not np.isfinite(value):
            largest = max(float(np.max(np.abs(p.data))) for p in self.model.parameters().values())
            raise TrainingError(
                f"Non-finite loss at step {self.step_count} (city {index}, t={t}, "
                f"lr={self.optimizer.state.lr}, largest |param|={largest:.3g})"
            )
        loss.backward()
        self.optimizer.step()
        self.step_count += 1
        return value

    def validate(self) -> float:
        """Mean denoising loss over the held-out cities with fixed (t, noise) per city."""
        if not self.validation:
            raise DomainError("No validation cities")
        losses = []
        with no_grad():
            for k, (_, cond) in enumerate(self.validation):
                rng = stream(self.config.seed, "validation", k)
                t = int(rng.integers(1, self.schedule.T + 1))
                zt, eps = forward_sample(self._val_z0[k], t, self.schedule, rng)
                losses.append(denoising_loss(self.model, zt, t, cond, eps).item())
        return float(np.mean(losses))

    def run(self, steps: Optional[int] = None) -> list[float]:
        """Train until ``steps`` (default ``config.steps``) total steps have been taken."""
        target = self.config.steps if steps is None else steps
        logger.info(
            f"Training {self.model.parameter_count()} parameters on {len(self.cities)} cities "
            f"(validation {len(self.validation)}), steps {self.step_count}->{target}"
        )
        window: list[float] = []
        while self.step_count < target:
            value = self.step()
            self.history.append(value)
            window.append(value)
            if self.step_count % self.config.log_every == 0:
                logger.info(f"Step {self.step_count}/{target}: loss {np.mean(window):.4f}")
                window = []
            if self.validation and self.step_count % self.epoch_steps == 0:
                val_loss = self.validate()
                self.validation_history.append(val_loss)
                epoch = self.step_count // self.epoch_steps
                logger.info(f"Epoch {epoch}: validation loss {val_loss:.4f}")
        return self.history

    def trained(self) -> TrainedModel:
        return TrainedModel(
            model=self.model,
            codec=self.codec,
            schedule=self.schedule,
            feature_stats=self.feature_stats,
            seed=self.config.seed,
            step=self.step_count,
            adam=self.optimizer.state,
        )

    def save(self, path: Union[str, Path]) -> Path:
        return save_trained(path, self.trained())


def train(
    corpus: Sequence[TrainingCity],
    config: TrainConfig,
    validation: Optional[Sequence[TrainingCity]] = None,
    resume: Optional[TrainedModel] = None,
) -> TrainedModel:
    """
    Train a denoiser on ``corpus``.

    Args:
        corpus: (reference flows, condition set) per city
        config: Training hyperparameters
        validation: Held-out cities; when omitted, ``config.validation_split`` of the corpus is held out
        resume: State of an earlier run to continue from

    Returns:
        TrainedModel holding parameters, codec, schedule, feature statistics and optimizer state
    """
    if validation is None:
        corpus, validation = split_validation(corpus, config.validation_split, config.seed)
    trainer = Trainer(corpus, config, validation=validation, resume=resume)
    trainer.run()
    return trainer.trained()
