import numpy as np
import pytest

from fene.core import PotentialParams, build_config_grid, equilibrium_cells, quadrature


@pytest.fixture
def params():
    return PotentialParams(k=1.0)


@pytest.fixture
def grid32():
    return build_config_grid(32, 32)


@pytest.fixture
def grid64():
    return build_config_grid(64, 64)


def random_density(grid, params, seed, floor=0.2):
    rng = np.random.default_rng(seed)
    v = equilibrium_cells(grid, params) * (floor + rng.random(grid.shape))
    return v / quadrature(v, grid)
