import numpy as np
import pytest

from antclust.dataset import generate_synthetic
from antclust.engine import Item, SimParams, init_run
from antclust.habitat import create_grid

from helpers import synth_kdd_lines


@pytest.fixture(scope="session")
def synthetic_800():
    """The standard synthetic setup: 4 classes x 200 items in [0,1]^2."""
    features, labels = generate_synthetic(classes=4, per_class=200, seed=7)
    return features, labels


@pytest.fixture
def small_state():
    """200 items, 20 ants on an auto-sized grid; cheap enough for unit tests."""
    features, labels = generate_synthetic(classes=4, per_class=50, seed=3)
    items = [Item(id=i, features=features[i], true_class=int(labels[i]))
             for i in range(len(labels))]
    grid = create_grid(len(items))
    return init_run(items, grid, seed=11, n_ants=20,
                    params=SimParams(t_max=10_000))


@pytest.fixture(scope="session")
def kdd_corpus(tmp_path_factory):
    """Synthetic KDD-format file large enough for the default 5092/6890 split."""
    path = tmp_path_factory.mktemp("kdd") / "synthetic_kdd.csv"
    path.write_text("\n".join(synth_kdd_lines(seed=5)) + "\n")
    return path


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
