"""Everything generation needs from a training run, stored as one ODCKPT1 file."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from libs.diffusion.codec import FlowCodec
from libs.diffusion.denoiser import DenoiserDims, GraphDenoiser
from libs.diffusion.schedule import NoiseSchedule
from libs.errors import FormatError
from libs.features.conditions import FeatureStats
from libs.nn.checkpoint import load_checkpoint, save_checkpoint
from libs.nn.optim import AdamState
from libs.utils.rng import stream

logger = logging.getLogger(__name__)

PARAM_PREFIX = "params/"
ADAM_M_PREFIX = "adam/m/"
ADAM_V_PREFIX = "adam/v/"


@dataclass
class TrainedModel:
    model: GraphDenoiser
    codec: FlowCodec
    schedule: NoiseSchedule
    feature_stats: FeatureStats
    seed: int = 0
    step: int = 0
    adam: Optional[AdamState] = None


def _codec_stats(codec: FlowCodec) -> np.ndarray:
    z_min, z_max = codec.z_range or (np.nan, np.nan)
    return np.array([codec.mean, codec.std, z_min, z_max])


def _codec_from_stats(stats: np.ndarray, path: Union[str, Path]) -> FlowCodec:
    """[mean, std] or [mean, std, z_min, z_max]; NaN bounds mean no recorded range."""
    if stats.shape not in ((2,), (4,)):
        raise FormatError(f"codec/stats has shape {stats.shape}", path)
    mean, std = float(stats[0]), float(stats[1])
    if stats.shape == (2,) or np.isnan(stats[2:]).any():
        return FlowCodec(mean=mean, std=std)
    return FlowCodec(mean=mean, std=std, z_min=float(stats[2]), z_max=float(stats[3]))


def save_trained(path: Union[str, Path], trained: TrainedModel) -> Path:
    tensors: dict[str, np.ndarray] = {
        "model/dims": trained.model.dims.as_array(),
        "train/seed": np.array([trained.seed], dtype=np.int64),
        "train/step": np.array([trained.step], dtype=np.int64),
        "schedule/beta": trained.schedule.beta,
        "codec/stats": _codec_stats(trained.codec),
        "features/mean": trained.feature_stats.mean,
        "features/std": trained.feature_stats.std,
    }
    for name, p in trained.model.parameters().items():
        tensors[PARAM_PREFIX + name] = p.data
    adam = trained.adam
    if adam is not None:
        tensors["adam/t"] = np.array([adam.t], dtype=np.int64)
        tensors["adam/hyper"] = np.array([adam.lr, adam.beta1, adam.beta2, adam.eps])
        for name in trained.model.parameters():
            if name in adam.m:
                tensors[ADAM_M_PREFIX + name] = adam.m[name]
                tensors[ADAM_V_PREFIX + name] = adam.v[name]
    path = save_checkpoint(path, tensors)
    logger.info(f"Checkpoint written to {path} (step {trained.step})")
    return path


def load_trained(path: Union[str, Path]) -> TrainedModel:
    tensors = load_checkpoint(path)
    required = ["model/dims", "train/seed", "train/step", "schedule/beta", "codec/stats", "features/mean", "features/std"]
    missing = [key for key in required if key not in tensors]
    if missing:
        raise FormatError(f"checkpoint lacks {', '.join(missing)}", path)

    dims = DenoiserDims.from_array(tensors["model/dims"])
    seed = int(tensors["train/seed"][0])
    model = GraphDenoiser(dims, stream(seed, "init"))
    model.load_state_dict(
        {name[len(PARAM_PREFIX):]: value for name, value in tensors.items() if name.startswith(PARAM_PREFIX)}
    )

    adam = None
    if "adam/t" in tensors:
        lr, beta1, beta2, eps = (float(v) for v in tensors["adam/hyper"])
        adam = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=int(tensors["adam/t"][0]))
        for name, value in tensors.items():
            if name.startswith(ADAM_M_PREFIX):
                adam.m[name[len(ADAM_M_PREFIX):]] = value
            elif name.startswith(ADAM_V_PREFIX):
                adam.v[name[len(ADAM_V_PREFIX):]] = value

    return TrainedModel(
        model=model,
        codec=_codec_from_stats(tensors["codec/stats"], path),
        schedule=NoiseSchedule(beta=tensors["schedule/beta"]),
        feature_stats=FeatureStats(mean=tensors["features/mean"], std=tensors["features/std"]),
        seed=seed,
        step=int(tensors["train/step"][0]),
        adam=adam,
    )
