import os
from pathlib import Path

import numpy as np
import pytest

from slimnet.mnist import CANONICAL_FILES, load_data_dir
from slimnet.synth import synthetic_splits

REPO_ROOT = Path(__file__).resolve().parent.parent

# Real MNIST is looked up here; tests that need it skip when absent.
DATA_DIR_CANDIDATES = [os.environ.get("SLIMNET_DATA_DIR"), str(REPO_ROOT / "data")]


def find_mnist_dir():
    for cand in DATA_DIR_CANDIDATES:
        if not cand:
            continue
        directory = Path(cand)
        if all(
            (directory / stem).exists() or (directory / (stem + ".gz")).exists()
            for stem in CANONICAL_FILES.values()
        ):
            return directory
    return None


def require_mnist():
    directory = find_mnist_dir()
    if directory is None:
        pytest.skip(
            "real MNIST IDX files not found (set SLIMNET_DATA_DIR or put the four "
            "canonical files under ./data)"
        )
    return directory


@pytest.fixture(scope="session")
def mnist_splits():
    return load_data_dir(require_mnist())


@pytest.fixture(scope="session")
def synth_data():
    """Desk-scale synthetic digit splits shared across tests."""
    return synthetic_splits(n_train=2000, n_validation=300, n_test=1000, seed=7)


@pytest.fixture(scope="session")
def synth_data_dir(tmp_path_factory):
    """A full-size (60k/10k) synthetic data directory in canonical IDX layout."""
    from slimnet.synth import write_synthetic_data_dir

    directory = tmp_path_factory.mktemp("synth-data")
    write_synthetic_data_dir(directory, seed=1, n_train=60000, n_test=10000)
    return directory


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
