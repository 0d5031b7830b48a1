from libs.nn.checkpoint import load_checkpoint, save_checkpoint
from libs.nn.gradcheck import gradcheck, numeric_gradient
from libs.nn.layers import MLP, LayerNorm, Linear, Module
from libs.nn.optim import Adam, AdamState, adam_step
from libs.nn.tensor import Tensor, is_grad_enabled, no_grad

__all__ = [
    "Adam",
    "AdamState",
    "LayerNorm",
    "Linear",
    "MLP",
    "Module",
    "Tensor",
    "adam_step",
    "gradcheck",
    "is_grad_enabled",
    "load_checkpoint",
    "no_grad",
    "numeric_gradient",
    "save_checkpoint",
]
