"""
Tests for velocity models, grids and reflectivity
"""

import numpy as np
import pytest

from bhil.core.model import (
    ConstantModel,
    GaussianLensModel,
    GradientModel,
    GridSpec,
    ReflectivityGrid,
    build_model,
    domain_check,
    point_scatterers,
    zero_reflectivity,
)
from bhil.exceptions import AssumptionViolation, ConfigError


def test_constant_model_speed_and_gradient():
    """Test constant speed and zero gradient"""
    model = ConstantModel(2.0)
    x = np.array([[0.1, 0.2, 0.3], [1.0, -1.0, 2.0]])
    np.testing.assert_array_equal(model.speed(x), [2.0, 2.0])
    np.testing.assert_array_equal(model.gradient(x), np.zeros((2, 3)))


def test_gradient_model_is_linear_in_depth():
    """Test c = a + b x3 and its gradient"""
    model = GradientModel(1.0, 0.5)
    assert float(model.speed(np.array([3.0, -2.0, 2.0]))) == pytest.approx(2.0)
    np.testing.assert_allclose(model.gradient(np.array([0.0, 0.0, 1.0])), [0.0, 0.0, 0.5])


def test_lens_speed_at_center():
    """Test lens speed c_bg (1 - A) at the center with zero gradient"""
    model = GaussianLensModel(1.0, 0.3, (0.0, 0.0, 1.5), 0.45)
    center = np.array([0.0, 0.0, 1.5])
    assert float(model.speed(center)) == pytest.approx(0.7)
    np.testing.assert_allclose(model.gradient(center), 0.0, atol=1e-15)


def test_lens_speed_bounds(rng):
    """Test c_bg (1 - A) <= c <= c_bg everywhere"""
    model = GaussianLensModel(1.0, 0.3, (0.0, 0.0, 1.5), 0.45)
    c = model.speed(rng.uniform(-2, 3, size=(1000, 3)))
    lo, hi = model.speed_bounds()
    assert np.all(c >= lo - 1e-12)
    assert np.all(c <= hi + 1e-12)


def test_lens_gradient_matches_finite_differences(rng):
    """Test the analytic lens gradient"""
    model = GaussianLensModel(1.0, 0.3, (0.1, -0.2, 1.4), 0.4)
    x = rng.uniform(-0.5, 1.5, size=(20, 3))
    h = 1e-6
    fd = np.stack(
        [(model.speed(x + h * e) - model.speed(x - h * e)) / (2 * h) for e in np.eye(3)], axis=-1
    )
    np.testing.assert_allclose(model.gradient(x), fd, atol=1e-8)


def test_lens_amplitude_must_stay_below_one():
    """Test that a lens amplitude >= 1 is rejected"""
    with pytest.raises(AssumptionViolation):
        GaussianLensModel(1.0, 1.0)


def test_build_model_from_mapping():
    """Test building models from config mappings"""
    model = build_model({"kind": "gaussian_lens", "center": [0.0, 0.0, 1.0]})
    assert isinstance(model, GaussianLensModel)
    assert model.center == (0.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        build_model({"kind": "marmousi"})


def test_domain_check_rejects_negative_gradient_speed():
    """Test that a gradient model reaching c <= 0 inside the box is rejected"""
    model = GradientModel(1.0, -1.0)
    with pytest.raises(AssumptionViolation):
        domain_check(model, (0.0, 0.0, 0.0), (1.0, 1.0, 2.0))
    domain_check(model, (0.0, 0.0, 0.0), (1.0, 1.0, 0.5))


def test_grid_spec_geometry(small_grid):
    """Test cell centers, volume and index lookup"""
    assert small_grid.size == 343
    assert small_grid.cell_volume == pytest.approx(1e-3)
    assert small_grid.centers().shape == (7, 7, 7, 3)
    assert small_grid.index_of((0.5, 0.0, 1.0)) == (3, 3, 3)
    np.testing.assert_allclose(small_grid.position_of((3, 3, 3)), (0.5, 0.0, 1.0))
    assert small_grid.symmetric_in_y2
    with pytest.raises(IndexError):
        small_grid.index_of((5.0, 0.0, 1.0))


def test_grid_spec_refine_keeps_extent(small_grid):
    """Test that refinement halves the spacing over the same extent"""
    fine = small_grid.refine(2)
    assert fine.dims == (13, 13, 13)
    np.testing.assert_allclose(fine.upper, small_grid.upper)


def test_grid_spec_rejects_bad_spacing():
    """Test grid validation"""
    with pytest.raises(ConfigError):
        GridSpec((0, 0, 0), (0.1, 0.0, 0.1), (2, 2, 2))


def test_point_scatterer_on_cell_center(small_grid):
    """Test a centered point occupies one cell and integrates to its amplitude"""
    refl = point_scatterers(small_grid, [((0.5, 0.0, 1.0), 2.0)], depth_floor=0.3)
    assert int(refl.support_mask().sum()) == 1
    assert refl.integral() == pytest.approx(2.0)


def test_point_scatterer_off_center_uses_trilinear_hat(small_grid):
    """Test an off-center point spreads over 8 cells and keeps its integral"""
    refl = point_scatterers(small_grid, [((0.53, 0.04, 1.02), 1.0)], depth_floor=0.3)
    assert int(refl.support_mask().sum()) == 8
    assert refl.integral() == pytest.approx(1.0)


def test_point_scatterer_above_depth_floor_rejected(small_grid):
    """Test the depth floor"""
    with pytest.raises(AssumptionViolation, match="Assumption 3.1"):
        point_scatterers(small_grid, [((0.5, 0.0, 0.8), 1.0)], depth_floor=0.9)


def test_point_scatterer_near_source_rejected(small_grid):
    """Test the source exclusion ball"""
    sources = np.array([[0.5, 0.0, 0.95]])
    with pytest.raises(AssumptionViolation, match="Source exclusion"):
        point_scatterers(small_grid, [((0.5, 0.0, 1.0), 1.0)], 0.3, sources=sources, epsilon=0.1)


def test_reflectivity_zero_depth_floor_rejected(small_grid):
    """Test that depth_floor must be positive"""
    with pytest.raises(AssumptionViolation, match="depth_floor must be > 0"):
        ReflectivityGrid(small_grid, np.zeros(small_grid.dims), 0.0)


def test_reflectivity_mirror_and_scale(small_grid):
    """Test y2 reflection and scaling"""
    refl = point_scatterers(small_grid, [((0.5, 0.2, 1.0), 1.0)], depth_floor=0.3)
    mirrored = refl.mirrored()
    assert mirrored.values[small_grid.index_of((0.5, -0.2, 1.0))] == refl.values[small_grid.index_of((0.5, 0.2, 1.0))]
    assert refl.scaled(3.0).integral() == pytest.approx(3.0)
    assert zero_reflectivity(small_grid, 0.3).integral() == 0.0
