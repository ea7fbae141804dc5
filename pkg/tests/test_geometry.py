"""
Tests for acquisition geometries and data volumes
"""

import numpy as np
import pytest

from bhil.core.geometry import (
    Axis,
    Crosswell,
    DataVolume,
    DenseArray,
    Walkaway,
    build_geometry,
    isochron_window_check,
    nyquist_check,
)
from bhil.exceptions import AssumptionViolation, ConfigError, ShapeMismatchError


def test_axis_is_cell_centered():
    """Test open-interval sampling"""
    axis = Axis(0.0, 1.0, 4)
    np.testing.assert_allclose(axis.samples(), [0.125, 0.375, 0.625, 0.875])
    assert axis.step == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        Axis(1.0, 1.0, 3)


def test_dense_array_layout(dense_geometry):
    """Test dense data shape and source order (s2 slowest)"""
    assert dense_geometry.data_shape == (4, 4, 8, 1024)
    S = dense_geometry.source_positions()
    assert S.shape == (16, 3)
    assert S[0, 1] == S[1, 1]
    assert S[0, 0] < S[1, 0]
    assert dense_geometry.flat_source_index((1, 2)) == 9
    with pytest.raises(IndexError):
        dense_geometry.flat_source_index((4, 0))


def test_crosswell_sources_on_offset_well(crosswell_geometry):
    """Test crosswell sources lie on (s0, 0, s)"""
    S = crosswell_geometry.source_positions()
    np.testing.assert_array_equal(S[:, 0], 1.0)
    np.testing.assert_array_equal(S[:, 1], 0.0)
    assert crosswell_geometry.data_shape == (8, 8, 1024)


def test_walkaway_rejects_zero_offset(time_axis):
    """Test walkaway s_min > 0"""
    with pytest.raises(AssumptionViolation):
        Walkaway(receivers=Axis(0.2, 1.8, 8), time_axis=time_axis, s_range=(0.0, 2.0), n_s=8)


def test_dense_source_inside_exclusion_radius(time_axis):
    """Test that a dense source on the borehole axis is rejected"""
    with pytest.raises(AssumptionViolation, match="Source exclusion"):
        DenseArray(
            receivers=Axis(0.2, 1.8, 8), time_axis=time_axis,
            s1_range=(-1.0, 1.0), s2_range=(-1.0, 1.0), n_s1=3, n_s2=3,
        )


def test_trace_pairs_order(walkaway_geometry):
    """Test trace enumeration in data order"""
    pairs = walkaway_geometry.trace_pairs()
    assert pairs.shape == (64, 2)
    np.testing.assert_array_equal(pairs[:3], [[0, 0], [0, 1], [0, 2]])


def test_build_geometry_from_mapping():
    """Test geometry construction from a config mapping"""
    geometry = build_geometry(
        {
            "kind": "crosswell",
            "receivers": {"lo": 0.2, "hi": 2.0, "n": 4},
            "time_axis": {"lo": 0.1, "hi": 3.0, "n": 100},
            "s_range": [0.0, 2.0],
            "n_s": 4,
        }
    )
    assert isinstance(geometry, Crosswell)
    with pytest.raises(ConfigError):
        build_geometry({"kind": "vsp", "receivers": {}, "time_axis": {}})


def test_nyquist_check():
    """Test dt <= 1 / (4 f_max)"""
    nyquist_check(Axis(0.0 + 1e-3, 1.0, 1000), 50.0)
    with pytest.raises(AssumptionViolation, match="Nyquist"):
        nyquist_check(Axis(1e-3, 1.0, 100), 50.0)


def test_isochron_window_check_warns(crosswell_geometry, caplog):
    """Test a warning when the time axis misses isochron times"""
    far = np.array([[0.5, 0.0, 30.0]])
    with caplog.at_level("WARNING"):
        t_lo, t_hi = isochron_window_check(crosswell_geometry, far, 1.0)
    assert t_hi > crosswell_geometry.time_axis.hi
    assert "does not cover" in caplog.text


def test_isochron_window_pairs_source_and_receiver_distances(crosswell_geometry):
    """Test that the window is the range of A + B over each (source, receiver, point)"""
    points = np.array([[0.9, 0.0, 0.2], [0.1, 0.0, 1.7]])
    t_lo, t_hi = isochron_window_check(crosswell_geometry, points, 2.0, halfwidth=0.1)
    sums = [
        np.linalg.norm(p - s) + np.linalg.norm(p - r)
        for s in crosswell_geometry.source_positions()
        for r in crosswell_geometry.receiver_positions()
        for p in points
    ]
    assert t_lo == pytest.approx(min(sums) / 2.0 - 0.1)
    assert t_hi == pytest.approx(max(sums) / 2.0 + 0.1)


def test_data_volume_shape_and_inner(walkaway_geometry, rng):
    """Test DataVolume validation and the dt-weighted inner product"""
    a = DataVolume(walkaway_geometry, rng.standard_normal(walkaway_geometry.data_shape))
    assert a.as_traces().shape == (8, 8, 1024)
    assert a.inner(a) == pytest.approx(np.sum(a.samples**2) * a.dt)
    with pytest.raises(ShapeMismatchError):
        DataVolume(walkaway_geometry, np.zeros((2, 2)))
