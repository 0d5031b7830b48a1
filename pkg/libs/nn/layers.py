"""Parameter containers: Module base class and the few layers the denoiser needs."""

from collections import OrderedDict
from typing import Iterator, Mapping, Sequence

import numpy as np

from libs.errors import FormatError, ShapeError
from libs.nn import functional as F
from libs.nn.tensor import Tensor


class Module:
    """
    Base class: attributes that are Tensors with ``requires_grad`` are
    parameters; attributes that are Modules (or lists of Modules) are
    children. Parameter names are dotted attribute paths in definition order.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{path}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{index}.")

    def parameters(self) -> "OrderedDict[str, Tensor]":
        return OrderedDict(self.named_parameters())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = [name for name in params if name not in state]
        unexpected = [name for name in state if name not in params]
        if missing or unexpected:
            raise FormatError(f"State mismatch: missing {missing}, unexpected {unexpected}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"Parameter {name}: stored shape {value.shape}, model has {p.shape}")
            p.data = value.copy()
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def _parameter(array: np.ndarray) -> Tensor:
    return Tensor(array, requires_grad=True)


class Linear(Module):
    """y = x @ W + b with Glorot-uniform W and zero b."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        limit = np.sqrt(6.0 / (in_features + out_features))
        self.weight = _parameter(rng.uniform(-limit, limit, size=(in_features, out_features)))
        self.bias = _parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = F.LAYER_NORM_EPS):
        self.gamma = _parameter(np.ones(dim))
        self.beta = _parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, axis=-1, eps=self.eps) * self.gamma + self.beta


class MLP(Module):
    """Stack of Linear layers with GELU between them (none after the last)."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ShapeError("MLP needs at least an input and an output size")
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]

    def forward(self, x: Tensor) -> Tensor:
        for index, layer in enumerate(self.layers):
            x = layer(x)
            if index < len(self.layers) - 1:
                x = F.gelu(x)
        return x
