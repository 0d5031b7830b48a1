import numpy as np
import pydantic
import pytest

from libs.diffusion import TrainConfig, Trainer, load_trained, predict_noise, train
from libs.diffusion.trainer import split_validation
from libs.errors import DomainError, FormatError, TrainingError
from libs.nn import Tensor, load_checkpoint, save_checkpoint
from libs.services.generation_service import GenerationService
from libs.synth import SynthConfig, generate_corpus


@pytest.fixture
def corpus(small_corpus):
    """(flows, conditions) pairs standardized with pooled statistics."""
    bundles = [city.to_bundle() for city in small_corpus]
    return GenerationService.training_cities(bundles, GenerationService.pooled_stats(bundles))


def _snapshot(model):
    return {name: p.data.copy() for name, p in model.parameters().items()}


def test_config_alias_and_checks():
    """``t`` sets the diffusion steps; inconsistent shapes and unknown keys are rejected."""
    assert TrainConfig(t=25).diffusion_steps == 25
    assert TrainConfig(diffusion_steps=25).diffusion_steps == 25
    with pytest.raises(pydantic.ValidationError):
        TrainConfig(d_model=8, heads=3)
    with pytest.raises(pydantic.ValidationError):
        TrainConfig(learning_rate=0.1)
    with pytest.raises(pydantic.ValidationError):
        TrainConfig(time_dim=5)


def test_trainer_needs_cities(tiny_train_config):
    """An empty corpus cannot be trained on."""
    with pytest.raises(DomainError):
        Trainer([], tiny_train_config)


def test_validate_needs_held_out_cities(corpus, tiny_train_config):
    """validate() without validation cities is an error."""
    with pytest.raises(DomainError):
        Trainer(corpus, tiny_train_config).validate()


def test_zero_learning_rate_keeps_parameters(corpus, tiny_train_config):
    """With lr = 0 the parameters never move."""
    trainer = Trainer(corpus, tiny_train_config.model_copy(update={"lr": 0.0}))
    before = _snapshot(trainer.model)
    trainer.run(5)
    after = _snapshot(trainer.model)
    assert trainer.step_count == 5
    assert all(np.array_equal(before[name], after[name]) for name in before)


def test_training_is_deterministic(corpus, tiny_train_config):
    """Same seed, same loss history and parameters."""
    a = Trainer(corpus, tiny_train_config)
    b = Trainer(corpus, tiny_train_config)
    assert a.run() == b.run()
    pa, pb = _snapshot(a.model), _snapshot(b.model)
    assert all(np.array_equal(pa[name], pb[name]) for name in pa)


def test_resume_continues_exactly(corpus, tiny_train_config, tmp_path):
    """Stopping after 4 steps and resuming gives the 5th step of the uninterrupted run."""
    full = Trainer(corpus, tiny_train_config)
    full.run(5)

    first = Trainer(corpus, tiny_train_config)
    first.run(4)
    path = first.save(tmp_path / "model.ckpt")

    resumed = Trainer(corpus, tiny_train_config, resume=load_trained(path))
    assert resumed.step_count == 4
    assert resumed.step() == full.history[4]
    pa, pb = _snapshot(full.model), _snapshot(resumed.model)
    assert all(np.array_equal(pa[name], pb[name]) for name in pa)


def test_checkpoint_reproduces_predictions(corpus, tiny_train_config, tmp_path):
    """A loaded checkpoint predicts exactly what the trained model did."""
    trainer = Trainer(corpus, tiny_train_config)
    trainer.run()
    loaded = load_trained(trainer.save(tmp_path / "model.ckpt"))

    _, cond = corpus[0]
    zt = np.random.default_rng(0).standard_normal((cond.n_regions, cond.n_regions))
    assert np.array_equal(predict_noise(trainer.model, zt, 3, cond), predict_noise(loaded.model, zt, 3, cond))
    assert loaded.codec == trainer.codec
    assert loaded.codec.z_range is not None
    assert np.array_equal(loaded.schedule.beta, trainer.schedule.beta)
    assert np.array_equal(loaded.feature_stats.mean, trainer.feature_stats.mean)
    assert loaded.step == 5


def test_checkpoint_codec_stats_layouts(corpus, tiny_train_config, tmp_path):
    """Two-value codec stats load without a clip range; other shapes are rejected."""
    trainer = Trainer(corpus, tiny_train_config)
    trainer.run()
    path = trainer.save(tmp_path / "model.ckpt")
    tensors = load_checkpoint(path)
    mean, std = tensors["codec/stats"][:2]

    tensors["codec/stats"] = np.array([mean, std])
    codec = load_trained(save_checkpoint(tmp_path / "two.ckpt", tensors)).codec
    assert (codec.mean, codec.std, codec.z_range) == (mean, std, None)

    tensors["codec/stats"] = np.array([mean, std, 0.0])
    with pytest.raises(FormatError, match="codec/stats"):
        load_trained(save_checkpoint(tmp_path / "three.ckpt", tensors))


def test_non_finite_loss_aborts(corpus, tiny_train_config, mocker):
    """A NaN loss stops training with a diagnostic error."""
    mocker.patch("libs.diffusion.trainer.denoising_loss", return_value=Tensor(np.array(np.nan)))
    trainer = Trainer(corpus, tiny_train_config)
    with pytest.raises(TrainingError, match="step 0"):
        trainer.step()


def test_split_validation(corpus):
    """A tenth of ten cities is one held-out city; the split is reproducible."""
    train_part, validation = split_validation(corpus, 0.1, seed=4)
    assert len(train_part) == 9
    assert len(validation) == 1
    held_out = validation[0][0].region_ids
    assert all(od.region_ids != held_out for od, _ in train_part)
    again = split_validation(corpus, 0.1, seed=4)
    assert [od.region_ids for od, _ in again[1]] == [od.region_ids for od, _ in validation]
    everything, none = split_validation(corpus, 0.0, seed=4)
    assert len(everything) == 10
    assert none == []


def test_validation_every_epoch(corpus, tiny_train_config):
    """Validation loss is recorded once per epoch."""
    config = tiny_train_config.model_copy(update={"epoch_steps": 2})
    trainer = Trainer(corpus[:8], config, validation=corpus[8:])
    trainer.run(4)
    assert len(trainer.validation_history) == 2
    assert all(np.isfinite(trainer.validation_history))


def test_train_holds_out_a_share(corpus, tiny_train_config):
    """train() splits off validation cities and returns the full training state."""
    config = tiny_train_config.model_copy(update={"validation_split": 0.2, "steps": 3})
    trained = train(corpus, config)
    assert trained.step == 3
    assert trained.adam is not None
    assert trained.adam.t == 3


@pytest.mark.slow
def test_loss_halves_on_one_city(tiny_train_config):
    """
    Within 500 steps on a single ten-region city, the denoising loss averaged
    over 32 fixed (t, noise) draws of that city falls to half or less.
    """
    bundle = generate_corpus(SynthConfig(n_cities=1, min_regions=10, max_regions=10, seed=3))[0].to_bundle()
    city = GenerationService.training_cities([bundle], GenerationService.pooled_stats([bundle]))[0]
    config = tiny_train_config.model_copy(
        update={"d_model": 16, "d_edge": 8, "time_dim": 8, "lr": 5e-3, "epoch_steps": 1000}
    )
    trainer = Trainer([city], config, validation=[city] * 32)
    before = trainer.validate()
    trainer.run(500)
    assert len(trainer.history) == 500
    assert trainer.validate() <= 0.5 * before
