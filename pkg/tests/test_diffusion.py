import numpy as np
import pytest

from libs.diffusion import (
    DenoiserDims,
    FlowCodec,
    GraphDenoiser,
    ODMatrix,
    ReverseVariance,
    denoising_loss,
    draw_reverse_noise,
    forward_sample,
    generate,
    make_schedule,
    posterior_mean,
    posterior_mean_from_z0,
    predict_noise,
    predicted_z0,
    reverse_chain,
)
from libs.errors import DomainError, ShapeError
from libs.features import RegionFeature, build_conditions
from libs.nn import Tensor, gradcheck

# Small betas keep untrained reverse chains in a finite range.
GENTLE = make_schedule(10, "linear", 1e-3, 0.05)
LONG = make_schedule(200)


def _model(cond_dim: int = 5, seed: int = 0, layers: int = 1) -> GraphDenoiser:
    dims = DenoiserDims(cond_dim=cond_dim, d_model=8, heads=2, layers=layers, d_edge=4, time_dim=4)
    return GraphDenoiser(dims, np.random.default_rng(seed))


def _cond(n: int, seed: int = 0, dim: int = 4):
    rng = np.random.default_rng(seed)
    features = [
        RegionFeature(f"r{k}", rng.standard_normal(dim), float(rng.integers(10, 5000))) for k in range(n)
    ]
    points = rng.uniform(0, 20, size=(n, 2))
    distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    return build_conditions(features, distances=distances)


class OracleNoise:
    """Returns the exact noise that turns Z_0 into the given Z_t."""

    def __init__(self, z0, schedule):
        self.z0 = z0
        self.schedule = schedule

    def __call__(self, zt, t, cond):
        alpha_bar = self.schedule.alpha_bar_at(t)
        return Tensor((zt - np.sqrt(alpha_bar) * self.z0) / np.sqrt(1.0 - alpha_bar))


def test_forward_sample_moments():
    """Z_t has mean sqrt(alpha_bar) Z_0 and variance 1 - alpha_bar."""
    schedule = make_schedule(20)
    z0 = np.array([[0.0, 1.5, -2.0], [0.5, 0.0, 3.0], [-1.0, 2.0, 0.0]])
    n = 10000
    t = 7
    zt, eps = forward_sample(np.broadcast_to(z0, (n, 3, 3)), t, schedule, np.random.default_rng(0))
    alpha_bar = schedule.alpha_bar_at(t)

    assert zt.shape == eps.shape == (n, 3, 3)
    bound = 4.0 * np.sqrt(1.0 - alpha_bar) / np.sqrt(n)
    assert np.all(np.abs(zt.mean(axis=0) - np.sqrt(alpha_bar) * z0) < bound)
    pooled = (zt - np.sqrt(alpha_bar) * z0).var()
    assert pooled == pytest.approx(1.0 - alpha_bar, rel=0.05)


def test_forward_sample_tiny_noise_keeps_signal():
    """With a negligible beta, Z_1 is Z_0 up to the noise scale."""
    schedule = make_schedule(10, "linear", 1e-9, 1e-9)
    z0 = np.random.default_rng(1).standard_normal((4, 4))
    zt, _ = forward_sample(z0, 1, schedule, np.random.default_rng(2))
    assert np.allclose(zt, z0, atol=1e-3)


def test_forward_sample_step_checked():
    """Step 0 is not a noising step."""
    with pytest.raises(DomainError):
        forward_sample(np.zeros((2, 2)), 0, make_schedule(5), np.random.default_rng(0))


@pytest.mark.parametrize("variance", [ReverseVariance.MARGINAL, ReverseVariance.POSTERIOR])
def test_reverse_chain_with_true_noise_recovers_z0(variance):
    """Feeding the true noise into every reverse step lands on Z_0."""
    schedule = make_schedule(50)
    z0 = np.random.default_rng(5).standard_normal((3, 3))
    cond = _cond(3)
    noise = draw_reverse_noise(np.random.default_rng(6), schedule, 3)
    z = reverse_chain(OracleNoise(z0, schedule), cond, schedule, noise, variance)
    assert np.max(np.abs(z - z0)) < 1e-6


def test_posterior_mean_last_step():
    """At t = 1 the reverse mean with the true noise is exactly Z_0."""
    schedule = GENTLE
    rng = np.random.default_rng(0)
    z0 = rng.standard_normal((2, 2))
    zt, eps = forward_sample(z0, 1, schedule, rng)
    assert np.allclose(posterior_mean(zt, eps, 1, schedule), z0, rtol=0, atol=1e-12)


@pytest.mark.parametrize("schedule,t", [(GENTLE, 1), (GENTLE, 7), (LONG, 1), (LONG, 120), (LONG, 200)])
def test_clean_estimate_form_matches_noise_form(schedule, t):
    """The step mean built from the implied clean value equals the noise-form mean."""
    rng = np.random.default_rng(t)
    zt, eps = rng.standard_normal((2, 4, 4))
    z0_hat = predicted_z0(zt, eps, t, schedule)
    expected = posterior_mean(zt, eps, t, schedule)
    assert np.allclose(posterior_mean_from_z0(zt, z0_hat, t, schedule), expected, rtol=1e-9, atol=1e-9)


def test_clipped_chain_with_true_noise_recovers_z0():
    """A clip range that contains Z_0 leaves the exact reverse chain untouched."""
    schedule = make_schedule(50)
    z0 = np.random.default_rng(5).standard_normal((3, 3))
    noise = draw_reverse_noise(np.random.default_rng(6), schedule, 3)
    clip_range = (float(z0.min()) - 0.5, float(z0.max()) + 0.5)
    z = reverse_chain(OracleNoise(z0, schedule), _cond(3), schedule, noise, clip_range=clip_range)
    assert np.max(np.abs(z - z0)) < 1e-6


@pytest.mark.parametrize("variance", [ReverseVariance.MARGINAL, ReverseVariance.POSTERIOR])
def test_clipped_chain_ends_inside_range(variance):
    """An untrained model on a 200-step schedule still ends inside the clip range."""
    noise = draw_reverse_noise(np.random.default_rng(7), LONG, 4)
    z = reverse_chain(_model(), _cond(4), LONG, noise, variance, clip_range=(-1.0, 1.0))
    assert np.all(np.isfinite(z))
    assert np.all(np.abs(z) <= 1.0 + 1e-9)


@pytest.mark.parametrize("variance", [ReverseVariance.MARGINAL, ReverseVariance.POSTERIOR])
def test_generate_long_schedule_stays_within_training_flows(variance):
    """With a fitted codec, generated flows never exceed the largest training flow."""
    reference = ODMatrix(tuple(f"r{k}" for k in range(4)), np.random.default_rng(8).integers(0, 500, (4, 4)).astype(float))
    codec = FlowCodec.fit([reference])
    od = generate(_model(), codec, _cond(4), LONG, rng=np.random.default_rng(9), variance=variance)
    assert np.all(np.isfinite(od.F))
    assert od.F.max() <= reference.F.max()


def test_reverse_chain_checks_noise_shape():
    """Draws for the wrong number of regions are rejected."""
    schedule = make_schedule(5)
    with pytest.raises(ShapeError):
        reverse_chain(_model(), _cond(3), schedule, draw_reverse_noise(np.random.default_rng(0), schedule, 4))


def test_predict_noise_shape_and_finite():
    """One finite value per ordered pair, including N = 1."""
    model = _model()
    for n in (1, 4):
        out = predict_noise(model, np.zeros((n, n)), 3, _cond(n))
        assert out.shape == (n, n)
        assert np.all(np.isfinite(out))


def test_predict_noise_checks_condition_width():
    """A condition set of another width does not fit the model."""
    with pytest.raises(ShapeError):
        predict_noise(_model(cond_dim=5), np.zeros((3, 3)), 1, _cond(3, dim=6))


def test_denoiser_permutation_equivariant():
    """Relabelling regions relabels the predicted noise the same way."""
    rng = np.random.default_rng(11)
    model = _model(layers=2)
    for trial in range(20):
        n = int(rng.integers(1, 6))
        cond = _cond(n, seed=trial)
        zt = rng.standard_normal((n, n))
        t = int(rng.integers(1, 20))
        order = rng.permutation(n)
        base = predict_noise(model, zt, t, cond)
        moved = predict_noise(model, zt[np.ix_(order, order)], t, cond.permuted(order))
        assert np.allclose(moved, base[np.ix_(order, order)], rtol=0, atol=1e-10)


def test_generate_permutation_equivariant():
    """generate with re-indexed noise returns the re-indexed matrix."""
    rng = np.random.default_rng(12)
    schedule = GENTLE
    codec = FlowCodec(mean=1.0, std=2.0)
    model = _model()
    for trial in range(20):
        n = int(rng.integers(1, 6))
        cond = _cond(n, seed=100 + trial)
        noise = draw_reverse_noise(rng, schedule, n)
        order = rng.permutation(n)
        base = generate(model, codec, cond, schedule, noise=[noise])
        moved = generate(model, codec, cond.permuted(order), schedule, noise=[noise.permuted(order)])
        assert moved.region_ids == tuple(base.region_ids[i] for i in order)
        assert np.array_equal(moved.F, base.F[np.ix_(order, order)])


def test_generate_output():
    """Generated flows are non-negative integers in region order."""
    schedule = GENTLE
    cond = _cond(4)
    od = generate(_model(), FlowCodec(mean=2.0, std=1.5), cond, schedule, rng=np.random.default_rng(0), n_samples=2)
    assert od.region_ids == cond.region_ids
    assert od.F.shape == (4, 4)
    assert np.all(od.F >= 0)
    assert np.array_equal(od.F, np.rint(od.F))


def test_generate_single_region():
    """A one-region city yields a 1 x 1 matrix."""
    schedule = GENTLE
    od = generate(_model(), FlowCodec(mean=0.0, std=1.0), _cond(1), schedule, rng=np.random.default_rng(0))
    assert od.F.shape == (1, 1)
    assert od.F[0, 0] >= 0


def test_generate_deterministic():
    """Same seed, same flows."""
    schedule = GENTLE
    cond = _cond(5)
    codec = FlowCodec(mean=1.0, std=1.0)
    a = generate(_model(), codec, cond, schedule, rng=np.random.default_rng(9))
    b = generate(_model(), codec, cond, schedule, rng=np.random.default_rng(9))
    assert np.array_equal(a.F, b.F)


def test_generate_argument_checks():
    """Generation needs a source of noise and at least one chain."""
    schedule = GENTLE
    codec = FlowCodec(mean=0.0, std=1.0)
    with pytest.raises(DomainError):
        generate(_model(), codec, _cond(2), schedule)
    with pytest.raises(DomainError):
        generate(_model(), codec, _cond(2), schedule, rng=np.random.default_rng(0), n_samples=0)


def test_denoising_loss_gradients():
    """Backprop through the whole denoiser matches central differences."""
    model = _model(cond_dim=5, seed=3)
    cond = _cond(3, seed=4)
    schedule = GENTLE
    rng = np.random.default_rng(5)
    zt, eps = forward_sample(rng.standard_normal((3, 3)), 4, schedule, rng)
    error = gradcheck(lambda: denoising_loss(model, zt, 4, cond, eps), model.parameters())
    assert error < 1e-4
