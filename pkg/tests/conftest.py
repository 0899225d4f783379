import numpy as np
import pytest

from bzmild.grid import GridSpec
from bzmild.model import preset_params


@pytest.fixture
def p():
    return preset_params(1.0)


@pytest.fixture
def grid1():
    return GridSpec(1, 100.0, 64)


@pytest.fixture
def grid2():
    return GridSpec(2, 20.0, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
