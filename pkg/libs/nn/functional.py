"""Function-style entry points for the tensor operations."""

from typing import Optional, Sequence

from libs.nn.tensor import (
    GELU,
    MSE,
    Add,
    Concat,
    Exp,
    Expand,
    LayerNorm,
    MatMul,
    Mean,
    Mul,
    ReLU,
    Slice,
    Softmax,
    Sum,
    Tensor,
)

LAYER_NORM_EPS = 1e-5


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def gelu(x: Tensor) -> Tensor:
    return GELU.apply(x)


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def layer_norm(x: Tensor, axis: int = -1, eps: float = LAYER_NORM_EPS) -> Tensor:
    return LayerNorm.apply(x, axis=axis, eps=eps)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def slice_(x: Tensor, index) -> Tensor:
    return Slice.apply(x, index=index)


def sum_(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(x, axis=axis, keepdims=keepdims)


def expand(x: Tensor, axis: int, n: int) -> Tensor:
    return Expand.apply(x, axis=axis, n=n)


def mse(prediction: Tensor, target: Tensor) -> Tensor:
    return MSE.apply(prediction, target)
