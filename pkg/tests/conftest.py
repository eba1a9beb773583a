import numpy as np
import pytest

from graphcast.synthgen import SynthConfig, write_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def synth_dir(tmp_path):
    """Small clean synthetic dataset on disk (4 products, 60 time points)."""
    cfg = SynthConfig(num_products=4, num_timepoints=60, edge_probability=0.5, seed=3)
    data_dir = tmp_path / "data"
    write_dataset(cfg, data_dir)
    return data_dir


FAST_FLAGS = [
    "--window-size", "6", "--epochs", "2", "--hidden", "8",
    "--hidden-gcn", "8", "--seed", "1",
]
