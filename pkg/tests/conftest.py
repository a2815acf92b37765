import numpy as np
import pytest

from bdfpos.momentum import ModelParams, build_radial_grid, free_dispersion, solve_dressed_dispersion
from bdfpos.pekar import minimize_pekar


@pytest.fixture(scope="session")
def table05():
    return solve_dressed_dispersion(ModelParams(0.05, 30.0, 1024))


@pytest.fixture(scope="session")
def free_table():
    return free_dispersion(build_radial_grid(1024, 30.0))


@pytest.fixture(scope="session")
def pekar_result():
    return minimize_pekar()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
