import numpy as np
import pytest

from libs.diffusion.trainer import TrainConfig
from libs.geo.boundaries import square_boundary
from libs.geo.tilestore import TileStore
from libs.synth.city import generate_corpus
from libs.synth.config import SynthConfig


@pytest.fixture
def rng():
    """Fixed generator for test inputs."""
    return np.random.default_rng(12345)


@pytest.fixture
def small_synth_config():
    """Ten small cities, enough for an 8:1:1 split."""
    return SynthConfig(n_cities=10, min_regions=4, max_regions=6, seed=3)


@pytest.fixture
def small_corpus(small_synth_config):
    """Generated (not written) synthetic cities."""
    return generate_corpus(small_synth_config)


@pytest.fixture
def tiny_train_config():
    """Micro denoiser that trains in well under a second per hundred steps."""
    return TrainConfig(
        t=10,
        d_model=8,
        heads=2,
        layers=1,
        d_edge=4,
        time_dim=4,
        steps=5,
        seed=0,
        validation_split=0.0,
        log_every=1000,
    )


@pytest.fixture
def tile_store(tmp_path):
    """Empty tile cache under the test's temporary directory."""
    return TileStore(tmp_path / "tiles")


@pytest.fixture
def unit_square():
    """A small region near the equator."""
    return square_boundary("r1", 0.001, 0.001, 0.004, 0.003)
