"""
Tests for backprojection, the ramp filter and point-spread functions
"""

import numpy as np
import pytest

from bhil.core.geometry import DataVolume
from bhil.core.model import ReflectivityGrid, point_scatterers
from bhil.exceptions import ConfigError, ShapeMismatchError
from bhil.imaging.migration import (
    ImageGrid,
    born_adjoint,
    filtered_backprojection,
    fwhm,
    model_inner,
    normal_psf,
    ramp_filter,
)
from bhil.raytrace.traveltime import TableSet, TravelTimeTable
from bhil.scatter.born import born_forward


def gradient_table(model, station, spec):
    """Exact traveltimes of c = a + b z as a table with every cell valid."""
    y = spec.centers()
    station = np.asarray(station, dtype=float)
    c_y = model.a + model.b * y[..., 2]
    c_s = model.a + model.b * station[2]
    dist2 = np.sum((y - station) ** 2, axis=-1)
    times = np.arccosh(1.0 + model.b**2 * dist2 / (2.0 * c_y * c_s)) / model.b
    return TravelTimeTable(station, spec, times, np.ones(spec.dims, dtype=bool))


def random_pair(rng, grid, geometry):
    reflectivity = ReflectivityGrid(grid, rng.standard_normal(grid.dims), depth_floor=0.3)
    data = DataVolume(geometry, rng.standard_normal(geometry.data_shape))
    return reflectivity, data


GEOMETRIES = ["dense_geometry", "crosswell_geometry", "walkaway_geometry"]


@pytest.mark.parametrize("geometry_name", GEOMETRIES)
def test_dot_product_constant(request, geometry_name, rng, constant_model, small_grid, wavelet):
    """Test <F m, d> == <m, F* d> for the constant-speed kernel"""
    geometry = request.getfixturevalue(geometry_name)
    m, d = random_pair(rng, small_grid, geometry)
    Fm = born_forward(constant_model, m, geometry, wavelet)
    Fd = born_adjoint(d, constant_model, geometry, small_grid, wavelet)
    lhs = Fm.inner(d)
    rhs = model_inner(m.values, Fd.values, small_grid)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))
    assert Fd.metadata["operator"] == "adjoint"


@pytest.mark.parametrize("geometry_name", GEOMETRIES)
def test_dot_product_tabled(request, geometry_name, rng, gradient_model, small_grid, wavelet):
    """Test the adjoint pairing on the traveltime-table path"""
    geometry = request.getfixturevalue(geometry_name)
    tables = TableSet(
        [gradient_table(gradient_model, s, small_grid) for s in geometry.source_positions()],
        [gradient_table(gradient_model, r, small_grid) for r in geometry.receiver_positions()],
    )
    m, d = random_pair(rng, small_grid, geometry)
    Fm = born_forward(gradient_model, m, geometry, wavelet, tables=tables)
    Fd = born_adjoint(d, gradient_model, geometry, small_grid, wavelet, tables=tables)
    lhs = Fm.inner(d)
    rhs = model_inner(m.values, Fd.values, small_grid)
    assert Fm.metadata["amplitude_convention"] == "pseudo_spreading"
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


def test_adjoint_rejects_other_geometry(rng, constant_model, small_grid, crosswell_geometry, walkaway_geometry, wavelet):
    d = DataVolume(walkaway_geometry, rng.standard_normal(walkaway_geometry.data_shape))
    with pytest.raises(ShapeMismatchError):
        born_adjoint(d, constant_model, crosswell_geometry, small_grid, wavelet)


def test_adjoint_needs_a_wavelet(rng, constant_model, small_grid, crosswell_geometry):
    d = DataVolume(crosswell_geometry, rng.standard_normal(crosswell_geometry.data_shape))
    with pytest.raises(ConfigError, match="wavelet"):
        born_adjoint(d, constant_model, crosswell_geometry, small_grid)


def test_ramp_order_zero_is_the_adjoint(rng, constant_model, small_grid, crosswell_geometry, wavelet):
    d = DataVolume(crosswell_geometry, rng.standard_normal(crosswell_geometry.data_shape))
    assert ramp_filter(d, 0) is d
    fbp = filtered_backprojection(d, constant_model, crosswell_geometry, small_grid, 0, wavelet)
    adj = born_adjoint(d, constant_model, crosswell_geometry, small_grid, wavelet)
    np.testing.assert_array_equal(fbp.values, adj.values)
    assert fbp.metadata["operator"] == "filtered_backprojection"


def test_ramp_order_validated(rng, crosswell_geometry):
    d = DataVolume(crosswell_geometry, rng.standard_normal(crosswell_geometry.data_shape))
    with pytest.raises(ConfigError):
        ramp_filter(d, 3)


def test_ramp_order_two_is_minus_second_derivative(crosswell_geometry, wavelet):
    """Test |2 pi f|^2 on a smooth pulse against -w''"""
    t = crosswell_geometry.time_axis.samples()
    pulse = wavelet.evaluate(t - 2.0)
    samples = np.broadcast_to(pulse, crosswell_geometry.data_shape).copy()
    filtered = ramp_filter(DataVolume(crosswell_geometry, samples), 2)
    expected = -wavelet.second_derivative(t - 2.0)
    np.testing.assert_allclose(filtered.as_traces()[0, 0], expected, atol=1e-3 * np.abs(expected).max())
    assert filtered.metadata["ramp_order"] == 2


def test_crosswell_image_is_mirror_symmetric(constant_model, small_grid, crosswell_geometry, wavelet):
    """Test that sources and receivers in the y2 = 0 plane image y and its reflection alike"""
    image = normal_psf(constant_model, crosswell_geometry, (0.5, 0.2, 1.0), wavelet, small_grid, depth_floor=0.3)
    values = image.values
    np.testing.assert_allclose(values, values[:, ::-1, :], rtol=1e-8, atol=1e-10 * np.abs(values).max())
    assert image.value_at((0.5, -0.2, 1.0)) == pytest.approx(image.value_at((0.5, 0.2, 1.0)), rel=1e-8)


def test_dense_psf_peaks_at_scatterer(constant_model, small_grid, dense_geometry, wavelet):
    image = normal_psf(constant_model, dense_geometry, (0.5, 0.0, 1.0), wavelet, small_grid, depth_floor=0.3)
    assert image.argmax() == small_grid.index_of((0.5, 0.0, 1.0))
    np.testing.assert_allclose(image.argmax_position(), [0.5, 0.0, 1.0], atol=1e-12)
    assert image.metadata["f_peak"] == wavelet.f_peak


def test_fwhm_of_triangle(small_grid):
    values = np.zeros(small_grid.dims)
    values[:, 3, 3] = [0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25]
    image = ImageGrid(small_grid, values)
    assert fwhm(image, axis=0) == pytest.approx(4.0)
    assert fwhm(image, axis=1) == pytest.approx(1.0)


def test_image_shape_validated(small_grid):
    with pytest.raises(ShapeMismatchError):
        ImageGrid(small_grid, np.zeros((2, 2, 2)))


def test_point_reflectivity_data_is_not_zero(constant_model, small_grid, crosswell_geometry, wavelet):
    refl = point_scatterers(small_grid, [((0.5, 0.0, 1.0), 1.0)], depth_floor=0.3)
    assert np.abs(born_forward(constant_model, refl, crosswell_geometry, wavelet).samples).max() > 0
