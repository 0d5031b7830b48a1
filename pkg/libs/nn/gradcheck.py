from typing import Callable, Mapping

import numpy as np

from libs.nn.tensor import Tensor


def numeric_gradient(loss_fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn()`` with respect to every entry of ``param``."""
    param.data = np.array(param.data, dtype=np.float64, copy=True)
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + h
        plus = loss_fn().item()
        flat[k] = original - h
        minus = loss_fn().item()
        flat[k] = original
        out[k] = (plus - minus) / (2.0 * h)
    return grad


def gradcheck(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor], h: float = 1e-5) -> float:
    """
    Compare backprop gradients with central finite differences.

    Args:
        loss_fn: Rebuilds the graph and returns a scalar loss on every call
        params: Leaf tensors to check; their data is perturbed in place and restored
        h: Finite-difference step

    Returns:
        The largest relative error ``|a - n| / (|a| + |n|)`` (norms per parameter)
    """
    for p in params.values():
        p.zero_grad()
    loss_fn().backward()
    analytic = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        numeric = numeric_gradient(loss_fn, p, h)
        a = analytic[name]
        denominator = np.linalg.norm(a) + np.linalg.norm(numeric)
        if denominator == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(a - numeric) / denominator))
    for p in params.values():
        p.zero_grad()
    return worst
