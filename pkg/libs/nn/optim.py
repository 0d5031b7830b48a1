from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from libs.errors import ShapeError
from libs.nn.tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
) -> AdamState:
    """
    One bias-corrected Adam update, applied to ``params`` in place.

    A parameter without a gradient is treated as having a zero gradient.

    Returns:
        The same ``state`` object, advanced by one step
    """
    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise ShapeError(f"Gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return state


class Adam:
    """Adam over a fixed set of named parameters, reading their ``.grad``."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3, state: Optional[AdamState] = None):
        self.params = dict(params)
        self.state = state if state is not None else AdamState(lr=lr)

    def step(self) -> None:
        adam_step(self.params, {name: p.grad for name, p in self.params.items()}, self.state)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
