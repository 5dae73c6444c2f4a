import numpy as np
import pytest

from visrendezvous.geometry.environment import builtin_environment


@pytest.fixture(scope="session")
def square_env():
    return builtin_environment("square")


@pytest.fixture(scope="session")
def lshape_env():
    return builtin_environment("lshape")


@pytest.fixture(scope="session")
def floorplan_env():
    return builtin_environment("floorplan")


@pytest.fixture(scope="session")
def pinwheel_env():
    return builtin_environment("pinwheel")


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
