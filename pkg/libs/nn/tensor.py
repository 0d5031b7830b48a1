"""
Dense tensors with reverse-mode automatic differentiation.

Every differentiable operation is a :class:`Function` subclass with a
``forward`` on raw arrays and a ``backward`` returning one gradient per
input. Calling ``Function.apply`` records the function on the output
tensor; :meth:`Tensor.backward` walks the recorded graph in reverse
topological order.

Broadcasting is limited to leading batch dimensions: two operands must
have equal shapes, or the shape of one must be a suffix of the other's
(e.g. ``(N, d) + (d,)``). Anything else needs an explicit reshape/expand.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Iterator, Optional, Sequence, Union

import numpy as np
from scipy.special import erf

from libs.errors import ShapeError, UsageError

Number = Union[int, float]
ArrayLike = Union[np.ndarray, Sequence, Number]

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording in the current thread."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_ctx")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, dtype=np.float64):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._ctx: Optional[Function] = None

    def __repr__(self) -> str:
        s = f"Tensor(shape={self.shape}"
        if self.requires_grad:
            s += ", requires_grad=True"
        if self._ctx is not None:
            s += f", grad_fn={type(self._ctx).__name__}"
        return s + ")"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    @staticmethod
    def ensure(value: Union[Tensor, ArrayLike]) -> Tensor:
        return value if isinstance(value, Tensor) else Tensor(value)

    # Arithmetic
    def __add__(self, other: Union[Tensor, Number]) -> Tensor:
        if isinstance(other, (int, float)):
            return AddScalar.apply(self, value=float(other))
        return Add.apply(self, Tensor.ensure(other))

    __radd__ = __add__

    def __sub__(self, other: Union[Tensor, Number]) -> Tensor:
        if isinstance(other, (int, float)):
            return AddScalar.apply(self, value=-float(other))
        return Sub.apply(self, Tensor.ensure(other))

    def __rsub__(self, other: Number) -> Tensor:
        return AddScalar.apply(MulScalar.apply(self, value=-1.0), value=float(other))

    def __mul__(self, other: Union[Tensor, Number]) -> Tensor:
        if isinstance(other, (int, float)):
            return MulScalar.apply(self, value=float(other))
        return Mul.apply(self, Tensor.ensure(other))

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> Tensor:
        if not isinstance(other, (int, float)):
            raise UsageError("Only division by a scalar is supported")
        return MulScalar.apply(self, value=1.0 / float(other))

    def __neg__(self) -> Tensor:
        return MulScalar.apply(self, value=-1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        return MatMul.apply(self, Tensor.ensure(other))

    def __getitem__(self, index) -> Tensor:
        return Slice.apply(self, index=index)

    # Shape and reductions
    def reshape(self, *shape: int) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes: int) -> Tensor:
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Transpose.apply(self, axes=axes)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    def expand(self, axis: int, n: int) -> Tensor:
        return Expand.apply(self, axis=axis, n=n)

    # Elementwise
    def relu(self) -> Tensor:
        return ReLU.apply(self)

    def gelu(self) -> Tensor:
        return GELU.apply(self)

    def exp(self) -> Tensor:
        return Exp.apply(self)

    def backward(self) -> None:
        """
        Populate ``.grad`` of every reachable leaf that requires a gradient.

        Leaf gradients accumulate across calls until ``zero_grad``.
        """
        if self.data.size != 1:
            raise UsageError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise UsageError("backward() on a tensor that does not require grad")

        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._ctx is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._ctx.backward(g)
            for parent, pg in zip(node._ctx.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise ShapeError(
                        f"{type(node._ctx).__name__} produced grad {pg.shape} for input {parent.shape}"
                    )
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _not_scalar(t: Tensor) -> float:
    raise UsageError(f"item() needs a single-element tensor, got shape {t.shape}")


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def _suffix_broadcast(a: tuple[int, ...], b: tuple[int, ...], op: str) -> None:
    if a == b:
        return
    short, long = (a, b) if len(a) <= len(b) else (b, a)
    if len(short) < len(long) and long[len(long) - len(short):] == short:
        return
    raise ShapeError(f"{op}: shapes {a} and {b} are not compatible (only leading-batch broadcasting)")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


class Function:
    def __init__(self, *parents: Tensor):
        self.parents = parents
        self.saved: tuple = ()

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs) -> Tensor:
        fn = cls(*inputs)
        out_data = fn.forward(*(t.data for t in inputs), **kwargs)
        out = Tensor(out_data, dtype=out_data.dtype)
        if is_grad_enabled() and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            out._ctx = fn
        return out

    def forward(self, *arrays: np.ndarray, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


class Add(Function):
    def forward(self, a, b):
        _suffix_broadcast(a.shape, b.shape, "add")
        self.saved = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        a_shape, b_shape = self.saved
        return _unbroadcast(grad, a_shape), _unbroadcast(grad, b_shape)


class Sub(Function):
    def forward(self, a, b):
        _suffix_broadcast(a.shape, b.shape, "sub")
        self.saved = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        a_shape, b_shape = self.saved
        return _unbroadcast(grad, a_shape), -_unbroadcast(grad, b_shape)


class Mul(Function):
    def forward(self, a, b):
        _suffix_broadcast(a.shape, b.shape, "mul")
        self.saved = (a, b)
        return a * b

    def backward(self, grad):
        a, b = self.saved
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class AddScalar(Function):
    def forward(self, a, value: float):
        return a + value

    def backward(self, grad):
        return (grad,)


class MulScalar(Function):
    def forward(self, a, value: float):
        self.saved = (value,)
        return a * value

    def backward(self, grad):
        (value,) = self.saved
        return (grad * value,)


class MatMul(Function):
    """(..., n, k) @ (..., k, m); a 2-D operand is shared across the other's batch."""

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul: inner dimensions differ in {a.shape} @ {b.shape}")
        a_batch, b_batch = a.shape[:-2], b.shape[:-2]
        if a_batch and b_batch and a_batch != b_batch:
            raise ShapeError(f"matmul: batch dimensions differ in {a.shape} @ {b.shape}")
        self.saved = (a, b)
        return np.matmul(a, b)

    def backward(self, grad):
        a, b = self.saved
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
        grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)


class ReLU(Function):
    def forward(self, a):
        self.saved = (a > 0,)
        return np.where(a > 0, a, 0.0).astype(a.dtype)

    def backward(self, grad):
        (positive,) = self.saved
        return (grad * positive,)


class GELU(Function):
    """Exact GELU: x * Phi(x)."""

    def forward(self, a):
        cdf = 0.5 * (1.0 + erf(a / np.sqrt(2.0)))
        self.saved = (a, cdf)
        return a * cdf

    def backward(self, grad):
        a, cdf = self.saved
        pdf = np.exp(-0.5 * a * a) / np.sqrt(2.0 * np.pi)
        return (grad * (cdf + a * pdf),)


class Exp(Function):
    def forward(self, a):
        out = np.exp(a)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return (grad * out,)


class Softmax(Function):
    def forward(self, a, axis: int):
        shifted = a - a.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=axis, keepdims=True)
        self.saved = (out, axis)
        return out

    def backward(self, grad):
        out, axis = self.saved
        return (out * (grad - (grad * out).sum(axis=axis, keepdims=True)),)


class LayerNorm(Function):
    """Normalization to zero mean / unit variance along ``axis`` (no affine part)."""

    def forward(self, a, axis: int, eps: float):
        mean = a.mean(axis=axis, keepdims=True)
        centered = a - mean
        var = (centered * centered).mean(axis=axis, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        normed = centered * inv_std
        self.saved = (normed, inv_std, axis)
        return normed

    def backward(self, grad):
        normed, inv_std, axis = self.saved
        g_mean = grad.mean(axis=axis, keepdims=True)
        gx_mean = (grad * normed).mean(axis=axis, keepdims=True)
        return (inv_std * (grad - g_mean - normed * gx_mean),)


class Concat(Function):
    def forward(self, *arrays, axis: int):
        ranks = {a.ndim for a in arrays}
        if len(ranks) != 1:
            raise ShapeError(f"concat: operands have different ranks {sorted(ranks)}")
        try:
            out = np.concatenate(arrays, axis=axis)
        except ValueError as e:
            raise ShapeError(f"concat: {e}") from e
        self.saved = ([a.shape[axis] for a in arrays], axis)
        return out

    def backward(self, grad):
        sizes, axis = self.saved
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(grad, splits, axis=axis))


class Slice(Function):
    def forward(self, a, index):
        self.saved = (a.shape, index)
        return np.array(a[index])

    def backward(self, grad):
        shape, index = self.saved
        full = np.zeros(shape, dtype=grad.dtype)
        np.add.at(full, index, grad)
        return (full,)


class Sum(Function):
    def forward(self, a, axis: Optional[int], keepdims: bool):
        self.saved = (a.shape, axis, keepdims)
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        shape, axis, keepdims = self.saved
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


class Mean(Function):
    def forward(self, a, axis: Optional[int], keepdims: bool):
        count = a.size if axis is None else a.shape[axis]
        self.saved = (a.shape, axis, keepdims, count)
        return np.asarray(a.mean(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        shape, axis, keepdims, count = self.saved
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad / count, shape).copy(),)


class Reshape(Function):
    def forward(self, a, shape):
        self.saved = (a.shape,)
        try:
            return a.reshape(shape)
        except ValueError as e:
            raise ShapeError(f"reshape {a.shape} -> {shape}: {e}") from e

    def backward(self, grad):
        (shape,) = self.saved
        return (grad.reshape(shape),)


class Transpose(Function):
    def forward(self, a, axes):
        if sorted(axes) != list(range(a.ndim)):
            raise ShapeError(f"transpose: {axes} is not a permutation of {a.ndim} axes")
        self.saved = (axes,)
        return np.transpose(a, axes)

    def backward(self, grad):
        (axes,) = self.saved
        return (np.transpose(grad, np.argsort(axes)),)


class Expand(Function):
    """Insert a new axis at ``axis`` and repeat the input ``n`` times along it."""

    def forward(self, a, axis: int, n: int):
        if n < 1:
            raise ShapeError("expand: n must be >= 1")
        self.saved = (axis,)
        return np.repeat(np.expand_dims(a, axis), n, axis=axis)

    def backward(self, grad):
        (axis,) = self.saved
        return (grad.sum(axis=axis),)


class MSE(Function):
    """mean((a - b)^2) over all entries."""

    def forward(self, a, b):
        if a.shape != b.shape:
            raise ShapeError(f"mse: shapes {a.shape} and {b.shape} differ")
        diff = a - b
        self.saved = (diff,)
        return np.asarray(np.mean(diff * diff))

    def backward(self, grad):
        (diff,) = self.saved
        g = grad * 2.0 * diff / diff.size
        return g, -g
