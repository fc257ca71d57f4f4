import numpy as np
import pytest

from nlslab.grid import PotentialSpec, bound_states, build_grid
from nlslab.ground import solve_for_mass
from nlslab.linearize import build_linearization

# shipped default setup: two s-states, resonance gap open, third state absent
POT = dict(shape="gaussian_well", depth=20.0, width=1.0)
LAM = 0.4
MASS = 9.0


@pytest.fixture(scope="session")
def grid():
    return build_grid(60.0, 1199)


@pytest.fixture(scope="session")
def pot():
    return PotentialSpec(**POT)


@pytest.fixture(scope="session")
def pair(pot, grid):
    return bound_states(pot, grid)


@pytest.fixture(scope="session")
def v(pot, grid):
    return pot.values(grid.r)


@pytest.fixture(scope="session")
def gs(pair, grid, v):
    return solve_for_mass(LAM, MASS, pair, grid, v)


@pytest.fixture(scope="session")
def sys(gs):
    return build_linearization(gs)


@pytest.fixture(scope="session")
def fgr_grid():
    # long coarse box: fine spectral ladder near 2 kappa at tractable density
    return build_grid(480.0, 1919)


@pytest.fixture(scope="session")
def fgr_sys(pot, fgr_grid):
    pair_f = bound_states(pot, fgr_grid)
    v_f = pot.values(fgr_grid.r)
    gs_f = solve_for_mass(LAM, MASS, pair_f, fgr_grid, v_f)
    return build_linearization(gs_f)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240311)
