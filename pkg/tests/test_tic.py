"""
Tests for the traveltime injectivity check
"""

import numpy as np
import pytest

from bhil.canonical.relations import SampleSpec
from bhil.canonical.tic import ConstantKinematics, check_tic, hash_collisions


def test_constant_kinematics_left_image(rng):
    """Test the vectorised left image against eval_canonical"""
    spec = SampleSpec("crosswell")
    Q = spec.sample(rng, 10)
    L = ConstantKinematics(spec).left(Q)
    for q, row in zip(Q, L):
        np.testing.assert_allclose(row, spec.point(q).left, rtol=1e-12)


def test_constant_kinematics_jacobian_y(rng):
    spec = SampleSpec("dense")
    kin = ConstantKinematics(spec)
    Q = spec.sample(rng, 4)
    Jy = kin.jacobian_y(Q)
    for q, block in zip(Q, Jy):
        J = kin.jacobian(q)
        np.testing.assert_allclose(block, J[3:7, 3:6], rtol=1e-10, atol=1e-12)


def test_dense_constant_speed_passes(rng):
    """Test immersion and injectivity for the dense array"""
    report = check_tic(SampleSpec("dense"), 300, rng, n_refine=20)
    assert report.immersion_pass
    assert report.injective_pass
    assert report.passed
    assert report.to_dict()["pass"] is True


@pytest.mark.parametrize("kind", ["crosswell", "walkaway"])
def test_mirror_witnesses_for_single_line_sources(kind, rng):
    """Test that y2 -> -y2 gives identical left images off the line geometry"""
    report = check_tic(SampleSpec(kind), 200, rng, n_refine=20)
    assert not report.injective_pass
    assert not report.passed
    mirrored = [
        w for w in report.witnesses
        if np.allclose(w["y_other"], [w["y"][0], -w["y"][1], w["y"][2]], atol=1e-5)
    ]
    assert mirrored


def test_hash_collisions_flags_equal_images():
    Q = np.array([[0.5, 1.0, 0.2, 0.3, 1.0, 1.0], [0.5, 1.0, 0.2, -0.3, 1.0, 1.0], [0.7, 1.2, 0.1, 0.1, 1.5, 1.0]])
    L = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [2.0, 1.0, 0.0]])
    collisions = hash_collisions(Q, L, 1, 1e-5, 1e-3)
    assert len(collisions) == 1
    assert collisions[0]["y"] == [0.2, 0.3, 1.0]
    assert collisions[0]["y_other"] == [0.2, -0.3, 1.0]


def test_hash_collisions_partitioned_matches_serial():
    Q = np.array([[0.5, 1.0, 0.2, 0.3, 1.0, 1.0], [0.5, 1.0, 0.2, -0.3, 1.0, 1.0]] * 3)
    L = np.tile(np.array([[1.0, 2.0, 3.0]]), (6, 1))
    assert hash_collisions(Q, L, 1, 1e-5, 1e-3, workers=3) == hash_collisions(Q, L, 1, 1e-5, 1e-3)
