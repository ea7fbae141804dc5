"""
Shared fixtures: small grids and geometries for fast operator tests
"""

import numpy as np
import pytest

from bhil.core.geometry import Axis, Crosswell, DenseArray, Walkaway
from bhil.core.model import ConstantModel, GradientModel, GridSpec
from bhil.scatter.wavelet import Ricker


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def constant_model():
    return ConstantModel(1.0)


@pytest.fixture
def gradient_model():
    return GradientModel(1.0, 0.5)


@pytest.fixture
def small_grid():
    """y2-symmetric grid around (0.5, 0, 1) with 0.1 spacing."""
    return GridSpec((0.2, -0.3, 0.7), (0.1, 0.1, 0.1), (7, 7, 7))


@pytest.fixture
def time_axis():
    return Axis(0.05, 4.0, 1024)


@pytest.fixture
def dense_geometry(time_axis):
    return DenseArray(
        receivers=Axis(0.2, 1.8, 8),
        time_axis=time_axis,
        s1_range=(-1.0, 1.0),
        s2_range=(-1.0, 1.0),
        n_s1=4,
        n_s2=4,
    )


@pytest.fixture
def crosswell_geometry(time_axis):
    return Crosswell(receivers=Axis(0.2, 1.8, 8), time_axis=time_axis, s0=1.0, s_range=(0.0, 2.0), n_s=8)


@pytest.fixture
def walkaway_geometry(time_axis):
    return Walkaway(receivers=Axis(0.2, 1.8, 8), time_axis=time_axis, s_range=(0.2, 2.0), n_s=8)


@pytest.fixture
def wavelet():
    return Ricker(15.0)
