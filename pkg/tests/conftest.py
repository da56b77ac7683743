import numpy as np
import pytest

from tomcom.config import load_config
from tomcom.domain import initial_state


@pytest.fixture(scope="session")
def reduced():
    return load_config("reduced")


@pytest.fixture(scope="session")
def canonical():
    return load_config("canonical")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def reduced_state(reduced):
    return initial_state(reduced, order_seed=0)


@pytest.fixture
def canonical_state(canonical):
    return initial_state(canonical, order_seed=0)
