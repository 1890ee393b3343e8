import numpy as np
import pytest

from varhardy.exponent import build_exponent
from varhardy.grid import GridFunction, make_grid

LOG_FAMILY = {"kind": "logfamily", "p_inf": 1.8, "c": 0.4}
SUB_UNIT_FAMILY = {"kind": "logfamily", "p_inf": 0.8, "c": 0.15}


@pytest.fixture(scope="session")
def grid9():
    return make_grid(1, 8, 9)


@pytest.fixture(scope="session")
def grid7():
    return make_grid(1, 8, 7)


@pytest.fixture(scope="session")
def grid6():
    return make_grid(1, 8, 6)


@pytest.fixture(scope="session")
def grid2d():
    return make_grid(2, 4, 5)


@pytest.fixture(scope="session")
def p2_9(grid9):
    return build_exponent(2.0, grid9)


@pytest.fixture(scope="session")
def plog_9(grid9):
    return build_exponent(LOG_FAMILY, grid9)


@pytest.fixture(scope="session")
def gauss_9(grid9):
    return GridFunction.from_callable(grid9, lambda x: np.exp(-4.0 * x**2))
