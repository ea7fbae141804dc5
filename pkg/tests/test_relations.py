"""
Tests for constant-speed canonical relations and their Jacobians
"""

import numpy as np
import pytest

from bhil.canonical.relations import (
    ANALYTIC,
    FINITE_DIFFERENCE,
    SampleSpec,
    block_det,
    closed_form_det,
    critical_surfaces,
    eval_canonical,
    projection_jacobians,
    sample_sigma1,
    sample_sigma2,
)
from bhil.exceptions import ConfigError

KINDS = ["dense", "crosswell", "walkaway"]


def test_eval_canonical_values():
    """Test t = (A + B)/c and eta = omega (u + v)/c"""
    point = eval_canonical("walkaway", 1.0, 0.5, (0.3, 0.4, 1.2), 2.0, c=1.5)
    y = np.array([0.3, 0.4, 1.2])
    A = np.linalg.norm(y - [1.0, 0.0, 0.0])
    B = np.linalg.norm(y - [0.0, 0.0, 0.5])
    u, v = point.unit_vectors()
    assert point.left_base[-1] == pytest.approx((A + B) / 1.5)
    np.testing.assert_allclose(point.eta, 2.0 * (u + v) / 1.5)
    assert point.left_fiber[-1] == 2.0
    assert not point.muted


def test_back_to_back_point_is_muted():
    """Test that the direct-arrival direction u = -v is flagged"""
    point = eval_canonical("crosswell", 1.0, 1.0, (0.5, 0.0, 1.0), 1.0)
    assert point.muted


@pytest.mark.parametrize(
    "args",
    [
        ("walkaway", 1.0, 0.5, (0.3, 0.4, 1.2), 0.0),
        ("walkaway", 1.0, 0.5, (0.3, 0.4, -1.0), 1.0),
        ("dense", 1.0, 0.5, (0.3, 0.4, 1.2), 1.0),
        ("vsp", 1.0, 0.5, (0.3, 0.4, 1.2), 1.0),
    ],
)
def test_eval_canonical_rejects_bad_input(args):
    with pytest.raises(ConfigError):
        eval_canonical(*args)


@pytest.mark.parametrize("kind", KINDS)
def test_analytic_jacobians_match_finite_differences(kind, rng):
    spec = SampleSpec(kind)
    for q in spec.sample(rng, 5):
        point = spec.point(q)
        analytic = projection_jacobians(point, ANALYTIC)
        fd = projection_jacobians(point, FINITE_DIFFERENCE)
        np.testing.assert_allclose(analytic.JL, fd.JL, rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(analytic.JR, fd.JR, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_closed_form_determinants(kind, rng):
    """Test each closed-form determinant against the same minor of the Jacobians"""
    spec = SampleSpec(kind)
    for q in spec.sample(rng, 10):
        point = spec.point(q)
        JL, JR = projection_jacobians(point).JL, projection_jacobians(point).JR
        expected = block_det(point, JL, JR)
        assert closed_form_det(point) == pytest.approx(expected, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("kind", ["crosswell", "walkaway"])
def test_determinant_vanishes_on_sigma1(kind, rng):
    spec = SampleSpec(kind)
    params, _ = sample_sigma1(spec, 5, rng)
    for q in params:
        point = spec.point(q)
        assert point.y[1] == 0.0
        assert closed_form_det(point) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("kind", ["crosswell", "walkaway"])
def test_sigma2_points_solve_second_surface(kind, rng):
    spec = SampleSpec(kind)
    params, excluded = sample_sigma2(spec, 5, rng)
    assert len(params) == 5
    assert excluded >= 0
    k = 1
    for q in params:
        _, f2 = critical_surfaces(kind, q[:k], q[k], q[k + 1 : k + 4], spec.s0)
        assert abs(f2) < 1e-9


def test_dense_has_no_closed_form_surfaces():
    with pytest.raises(ConfigError):
        critical_surfaces("dense", (0.5, 0.5), 1.0, (0.1, 0.2, 1.0))


def test_sample_spec_respects_exclusions(rng):
    spec = SampleSpec("dense", epsilon=0.3)
    q = spec.sample(rng, 200)
    assert q.shape == (200, 7)
    assert np.all(np.linalg.norm(q[:, :2], axis=1) > 0.3)
    assert np.all(spec.admissible(q))
