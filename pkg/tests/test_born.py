"""
Tests for Born forward modeling
"""

import numpy as np
import pytest

from bhil.core.model import point_scatterers, zero_reflectivity
from bhil.exceptions import ConfigError
from bhil.scatter.born import GREEN_FUNCTION, born_forward
from bhil.scatter.mutes import DirectArrival


@pytest.fixture
def point_reflectivity(small_grid):
    return point_scatterers(small_grid, [((0.5, 0.0, 1.0), 1.0)], depth_floor=0.3)


def test_single_scatterer_matches_closed_form(constant_model, point_reflectivity, walkaway_geometry, wavelet):
    """Test d(t) = w''(t - (A + B)/c) 2/c^3 / (16 pi^2 A B) for one scatterer"""
    data = born_forward(constant_model, point_reflectivity, walkaway_geometry, wavelet)
    y = np.array([0.5, 0.0, 1.0])
    S = walkaway_geometry.source_positions()[2]
    R = walkaway_geometry.receiver_positions()[3]
    A, B = np.linalg.norm(y - S), np.linalg.norm(y - R)
    t = walkaway_geometry.time_axis.samples()
    lag = t - (A + B)
    expected = wavelet.second_derivative(lag) * 2.0 / (16.0 * np.pi**2 * A * B)
    trace = data.as_traces()[2, 3]
    dt = walkaway_geometry.time_axis.step
    interior = np.abs(lag) < wavelet.halfwidth - dt
    np.testing.assert_allclose(trace[interior], expected[interior], rtol=1e-9, atol=1e-12)
    assert not np.any(trace[np.abs(lag) > wavelet.halfwidth + dt])


def test_linearity(constant_model, small_grid, crosswell_geometry, wavelet):
    r1 = point_scatterers(small_grid, [((0.5, 0.0, 1.0), 1.0)], depth_floor=0.3)
    r2 = point_scatterers(small_grid, [((0.4, 0.1, 0.9), -0.5)], depth_floor=0.3)
    both = point_scatterers(small_grid, [((0.5, 0.0, 1.0), 2.0), ((0.4, 0.1, 0.9), -1.0)], depth_floor=0.3)
    d1 = born_forward(constant_model, r1, crosswell_geometry, wavelet).samples
    d2 = born_forward(constant_model, r2, crosswell_geometry, wavelet).samples
    d12 = born_forward(constant_model, both, crosswell_geometry, wavelet).samples
    np.testing.assert_allclose(d12, 2.0 * (d1 + d2), rtol=1e-10, atol=1e-12)


def test_zero_reflectivity_gives_zero_data(constant_model, small_grid, dense_geometry, wavelet):
    data = born_forward(constant_model, zero_reflectivity(small_grid, 0.3), dense_geometry, wavelet)
    assert data.samples.shape == dense_geometry.data_shape
    assert not np.any(data.samples)


def test_metadata_and_mute_log(constant_model, point_reflectivity, crosswell_geometry, wavelet):
    mute = DirectArrival(0.05, 0.05)
    data = born_forward(constant_model, point_reflectivity, crosswell_geometry, wavelet, mutes=[mute])
    assert data.metadata["amplitude_convention"] == GREEN_FUNCTION
    assert data.metadata["wavelet"] == wavelet.to_dict()
    assert data.metadata["mutes"] == [mute.to_dict()]


def test_variable_background_needs_tables(gradient_model, point_reflectivity, walkaway_geometry, wavelet):
    with pytest.raises(ConfigError, match="traveltime tables"):
        born_forward(gradient_model, point_reflectivity, walkaway_geometry, wavelet)
