import pytest

from fracdelta import ModelParams, RegularPart, calibrate_grid, make_datum


@pytest.fixture(scope="session")
def focusing_params():
    return ModelParams(0.75, -1.0, 0.4, 1.0)


@pytest.fixture(scope="session")
def small_datum(focusing_params):
    return make_datum(RegularPart(amplitude=0.25), focusing_params)


@pytest.fixture(scope="session")
def grid_075(focusing_params):
    return calibrate_grid(focusing_params, t_resolve=1.0)
