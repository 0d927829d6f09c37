import numpy as np
import pytest

from gausscone import semigroup as sg
from gausscone.operators import Grid


@pytest.fixture(scope="session")
def grid1():
    return Grid(1, 8.0, 1.0 / 32.0)


@pytest.fixture(scope="session")
def grid1_wide():
    return Grid(1, 16.0, 1.0 / 16.0)


@pytest.fixture(scope="session")
def grid2():
    return Grid(2, 8.0, 1.0 / 16.0)


@pytest.fixture(scope="session")
def bump0():
    return sg.bump([0.0], 1.0)


@pytest.fixture(scope="session")
def bump2():
    return sg.bump([2.0], 0.75)


@pytest.fixture(scope="session")
def hermite2():
    return sg.hermite([2])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
