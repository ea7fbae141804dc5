"""
Tests for the directional cone and direct-arrival mutes
"""

import numpy as np
import pytest

from bhil.core.geometry import Axis, DataVolume, Walkaway
from bhil.exceptions import AssumptionViolation, ConfigError
from bhil.scatter.mutes import (
    DirectArrival,
    DirectionalCone,
    apply_direct_arrival_mute,
    apply_directional_mute,
    build_mute,
)
from bhil.scatter.wavelet import Ricker


@pytest.fixture
def gather_geometry():
    """One source and 512 receivers on a finely sampled borehole."""
    return Walkaway(receivers=Axis(0.1, 3.9, 512), time_axis=Axis(1e-3, 2.0, 1024), s_range=(0.5, 1.5), n_s=1)


def plane_wave(geometry, rho0, c=1.0, t0=1.0):
    """w(t - t0 - rho0 (r - 2) / c): an arrival with borehole slowness rho0 / c."""
    r = geometry.receivers.samples()
    t = geometry.time_axis.samples()
    w = Ricker(20.0)
    samples = w.evaluate(t[None, :] - t0 - rho0 * (r[:, None] - 2.0) / c)
    return DataVolume(geometry, samples[None])


def window_interior(geometry, center=2.0, halfwidth=0.5):
    r = geometry.receivers.samples()
    return (r >= center - halfwidth) & (r <= center + halfwidth)


def cone(rho0):
    return DirectionalCone(
        receiver_window_center=2.0,
        window_halfwidth=1.5,
        cone_axis=rho0,
        cone_halfangle=0.5,
        taper_fraction=0.2,
    )


def test_cone_attenuates_arrival_on_its_axis(gather_geometry):
    """Test >= 40 dB attenuation of a plane wave inside the cone"""
    data = plane_wave(gather_geometry, 0.5)
    muted = apply_directional_mute(data, cone(0.5))
    inside = window_interior(gather_geometry)
    before = np.sum(data.as_traces()[0, inside] ** 2)
    after = np.sum(muted.as_traces()[0, inside] ** 2)
    assert 10.0 * np.log10(after / before) <= -40.0


def test_cone_preserves_arrival_outside(gather_geometry):
    """Test that a plane wave well outside the cone changes by at most 1%"""
    data = plane_wave(gather_geometry, -0.5)
    muted = apply_directional_mute(data, cone(0.5))
    inside = window_interior(gather_geometry)
    diff = muted.as_traces()[0, inside] - data.as_traces()[0, inside]
    assert np.linalg.norm(diff) <= 0.01 * np.linalg.norm(data.as_traces()[0, inside])
    assert muted.metadata["mutes"][0]["kind"] == "directional_cone"


def test_cone_window_must_fit_receivers(gather_geometry):
    spec = DirectionalCone(receiver_window_center=3.7, window_halfwidth=0.5, cone_axis=0.0, cone_halfangle=0.3)
    with pytest.raises(ConfigError):
        apply_directional_mute(plane_wave(gather_geometry, 0.0), spec)


def test_cone_window_needs_enough_receivers(gather_geometry):
    spec = DirectionalCone(receiver_window_center=2.0, window_halfwidth=0.01, cone_axis=0.0, cone_halfangle=0.3)
    with pytest.raises(ConfigError, match="at least"):
        apply_directional_mute(plane_wave(gather_geometry, 0.0), spec)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"cone_halfangle": 0.0},
        {"cone_halfangle": 2.0},
        {"cone_axis": 1.5},
        {"taper_fraction": 0.0},
    ],
)
def test_cone_parameters_validated(kwargs):
    params = {"receiver_window_center": 1.0, "window_halfwidth": 0.5, "cone_axis": 0.0, "cone_halfangle": 0.3}
    params.update(kwargs)
    with pytest.raises(AssumptionViolation):
        DirectionalCone(**params)


def test_direct_arrival_mute_zeroes_early_samples(crosswell_geometry):
    """Test zero before |S - R|/c + epsilon and unity after the taper"""
    ones = DataVolume(crosswell_geometry, np.ones(crosswell_geometry.data_shape))
    spec = DirectArrival(epsilon_time=0.05, taper_time=0.1)
    muted = apply_direct_arrival_mute(ones, crosswell_geometry, 1.0, spec)
    S = crosswell_geometry.source_positions()
    R = crosswell_geometry.receiver_positions()
    t = crosswell_geometry.time_axis.samples()
    offset = np.linalg.norm(S[:, None, :] - R[None, :, :], axis=-1)
    traces = muted.as_traces()
    early = t[None, None, :] <= offset[..., None] + 0.05
    late = t[None, None, :] >= offset[..., None] + 0.15
    assert np.all(traces[early] == 0.0)
    np.testing.assert_allclose(traces[late], 1.0)
    assert np.all((traces >= 0.0) & (traces <= 1.0))


def test_direct_arrival_requires_positive_epsilon():
    with pytest.raises(AssumptionViolation):
        DirectArrival(epsilon_time=0.0, taper_time=0.1)


def test_build_mute():
    assert isinstance(build_mute({"kind": "direct_arrival", "epsilon_time": 0.1, "taper_time": 0.1}), DirectArrival)
    with pytest.raises(ConfigError):
        build_mute({"kind": "bandpass"})
