import os

import numpy as np
import pytest

from models.lti_system import LtiSystem
from models.random_system import make_random_system
from utils.config import reload_config

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")

# x_{t+1} = 0.5 x + u + w, Q = R = 1: P solves P^2 = P/4 + 1
SCALAR_P = (0.25 + np.sqrt(4.0625)) / 2.0
SCALAR_RATIO = 2.0 + 0.25 * SCALAR_P


@pytest.fixture(autouse=True)
def fresh_config():
    """CLI runs mutate the global configuration; start every test from the defaults"""
    yield reload_config()
    reload_config()


@pytest.fixture
def scalar_system():
    return LtiSystem([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[1.0]], name="scalar_example")


@pytest.fixture
def zero_a_system():
    return LtiSystem([[0.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]], name="zero_a")


@pytest.fixture
def tall_system():
    """n = 3, p = 1, m = 2: exercises the general M-Riccati path"""
    return make_random_system(3, 1, 2, seed=11)


@pytest.fixture
def square_system():
    return make_random_system(3, 2, 3, seed=5)


@pytest.fixture
def scalar_path():
    return os.path.join(DATA_DIR, "scalar_example.sys")


@pytest.fixture
def four_state_path():
    return os.path.join(DATA_DIR, "unstable_4state.sys")
