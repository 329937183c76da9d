import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.spectral_grid import TEMPERATURE, Grid, random_field  # noqa: E402
from models.twin_experiment import ExperimentConfig  # noqa: E402


@pytest.fixture
def unit_grid():
    """[0,1]^3 as a y-invariant slice"""
    return Grid(1.0, 1.0, 16, 1, 16)


@pytest.fixture
def slice_grid():
    return Grid(2.0, 1.0, 24, 1, 16)


@pytest.fixture
def grid3d():
    return Grid(1.5, 1.2, 12, 10, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(20150901)


@pytest.fixture
def random_theta(rng):
    def make(grid, amplitude=1.0):
        return random_field(grid, TEMPERATURE, rng, amplitude=amplitude)
    return make


@pytest.fixture
def small_cfg():
    """Sub-critical Ra on a coarse slice: quick to spin up and to run"""
    return ExperimentConfig(Ra=20.0, Nx=16, Nz=12, dt=2e-3, T_final=0.2, mu=50.0, h=0.2,
                            T_spinup=0.1, record_every=5)


@pytest.fixture
def convecting_cfg():
    """Ra above the convection onset on a coarse slice"""
    return ExperimentConfig(Ra=50.0, Nx=32, Nz=17, dt=1e-3, T_final=2.0, mu=250.0, h=0.06,
                            c_universal=0.01, record_every=5)
