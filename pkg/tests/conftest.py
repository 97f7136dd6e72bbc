"""Shared fixtures: small grids, profiles and an isolated config file."""

import numpy as np
import pytest

from shearlab.core.grid import Grid
from shearlab.core.profile import ShearProfile


@pytest.fixture
def small_grid():
    return Grid(16, 32, 8.0)


@pytest.fixture
def flow_grid():
    """Integer eta spacing and a wide retained band for time-stepping tests."""
    return Grid(8, 64, np.pi)


@pytest.fixture
def couette(flow_grid):
    return ShearProfile.couette(flow_grid, 1e-2)


@pytest.fixture
def bump_grid():
    return Grid(8, 64, 8.0)


@pytest.fixture
def bump(bump_grid):
    return ShearProfile.tanh_bump(bump_grid, 1e-3, 0.5, 1.0)


@pytest.fixture
def config_path(tmp_path):
    return tmp_path / "config" / "config.json"
