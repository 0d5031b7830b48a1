from libs.diffusion.artifacts import TrainedModel, load_trained, save_trained
from libs.diffusion.codec import FlowCodec, decode_flows, encode_flows
from libs.diffusion.denoiser import DenoiserDims, GraphDenoiser, predict_noise
from libs.diffusion.odmatrix import ODMatrix
from libs.diffusion.process import (
    ReverseNoise,
    ReverseVariance,
    draw_reverse_noise,
    forward_sample,
    posterior_mean,
    posterior_mean_from_z0,
    predicted_z0,
)
from libs.diffusion.sampler import generate, reverse_chain
from libs.diffusion.schedule import NoiseSchedule, ScheduleKind, make_schedule
from libs.diffusion.trainer import TrainConfig, Trainer, denoising_loss, train

__all__ = [
    "DenoiserDims",
    "FlowCodec",
    "GraphDenoiser",
    "NoiseSchedule",
    "ODMatrix",
    "ReverseNoise",
    "ReverseVariance",
    "ScheduleKind",
    "TrainConfig",
    "TrainedModel",
    "Trainer",
    "decode_flows",
    "denoising_loss",
    "draw_reverse_noise",
    "encode_flows",
    "forward_sample",
    "generate",
    "load_trained",
    "make_schedule",
    "posterior_mean",
    "posterior_mean_from_z0",
    "predict_noise",
    "predicted_z0",
    "reverse_chain",
    "save_trained",
    "train",
]
