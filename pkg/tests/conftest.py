import numpy as np
import pytest

from coldsim import topology


@pytest.fixture(scope="session")
def ring4():
    return topology.metropolis_weights(topology.build_graph("ring", 4))


@pytest.fixture(scope="session")
def complete4():
    return topology.metropolis_weights(topology.build_graph("complete", 4))


@pytest.fixture(scope="session")
def er20():
    return topology.metropolis_weights(topology.build_graph("erdos_renyi", 20, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
