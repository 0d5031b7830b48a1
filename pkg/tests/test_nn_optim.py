import math

import numpy as np
import pytest

from libs.errors import FormatError, ShapeError
from libs.nn import Adam, AdamState, Tensor, adam_step, load_checkpoint, save_checkpoint


def test_zero_gradient_leaves_parameters():
    """A zero gradient does not move anything."""
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    adam_step({"p": p}, {"p": np.zeros(2)}, AdamState())
    assert np.array_equal(p.data, [1.0, -2.0])


def test_first_step_by_hand():
    """After bias correction the first step is lr * g / (|g| + eps)."""
    p = Tensor(np.array([0.5]), requires_grad=True)
    state = adam_step({"p": p}, {"p": np.array([0.2])}, AdamState(lr=0.1))
    assert state.t == 1
    assert p.data[0] == pytest.approx(0.5 - 0.1 * 0.2 / (0.2 + 1e-8), rel=1e-12)


def test_constant_gradient_moves_monotonically():
    """Repeated steps with the same gradient keep moving against it."""
    p = Tensor(np.array([0.0]), requires_grad=True)
    state = AdamState(lr=0.01)
    positions = []
    for _ in range(3):
        adam_step({"p": p}, {"p": np.array([3.0])}, state)
        positions.append(p.data[0])
    assert positions[0] > positions[1] > positions[2]
    assert positions[0] == pytest.approx(-0.01)


def test_missing_gradient_counts_as_zero():
    """Parameters without a gradient still get a state entry and stay put."""
    p = Tensor(np.ones(3), requires_grad=True)
    state = adam_step({"p": p}, {}, AdamState())
    assert np.array_equal(p.data, np.ones(3))
    assert state.m["p"].shape == (3,)


def test_gradient_shape_checked():
    """Gradients must match their parameter."""
    p = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        adam_step({"p": p}, {"p": np.ones(2)}, AdamState())


def test_optimizer_reads_grads():
    """Adam.step uses each parameter's .grad; zero_grad clears them."""
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam({"p": p}, lr=0.5)
    (p * 2.0).sum().backward()
    opt.step()
    assert p.data[0] == pytest.approx(0.5, rel=1e-6)
    opt.zero_grad()
    assert p.grad is None


def test_checkpoint_preserves_arrays(tmp_path):
    """Names, order, dtypes and values survive a save and load."""
    tensors = {
        "w": np.random.default_rng(0).standard_normal((3, 2)),
        "half": np.arange(4, dtype=np.float32),
        "step": np.array([7], dtype=np.int64),
        "scalar": np.array(math.pi),
    }
    loaded = load_checkpoint(save_checkpoint(tmp_path / "m.ckpt", tensors))
    assert list(loaded) == list(tensors)
    for name, value in tensors.items():
        assert loaded[name].dtype == value.dtype
        assert np.array_equal(loaded[name], value)


def test_checkpoint_rejects_truncation(tmp_path):
    """A cut-off file is a format error."""
    path = save_checkpoint(tmp_path / "m.ckpt", {"w": np.ones(10)})
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_checkpoint_rejects_other_files(tmp_path):
    """Files without the ODCKPT1 magic are rejected."""
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"PK\x03\x04 not a checkpoint")
    with pytest.raises(FormatError):
        load_checkpoint(path)
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "missing.ckpt")
