import numpy as np
import pytest

from hazevo.errors import NearSingularRotation, NonRigid
from hazevo.se3 import (PoseSE3, compose, inverse, nearest_rotation,
                        rotation_angle, se3_exp, se3_log)

from conftest import random_pose


def test_exp_zero_twist_is_identity():
    p = se3_exp(np.zeros(6))
    assert np.array_equal(p.rotation, np.eye(3))
    assert np.array_equal(p.translation, np.zeros(3))


def test_exp_quarter_turn_about_z_maps_x_to_y():
    # hand evaluation of Rodrigues: R = [[0,-1,0],[1,0,0],[0,0,1]]
    p = se3_exp([0.0, 0.0, np.pi / 2, 0.0, 0.0, 0.0])
    assert np.allclose(p.rotation @ np.array([1.0, 0, 0]),
                       np.array([0.0, 1.0, 0.0]), atol=1e-12)
    assert np.allclose(p.translation, 0.0)


def test_exp_pure_translation():
    p = se3_exp([0.0, 0.0, 0.0, 1.0, 2.0, 3.0])
    assert np.array_equal(p.rotation, np.eye(3))
    assert np.allclose(p.translation, [1.0, 2.0, 3.0], atol=1e-15)


def test_log_identity_is_zero():
    assert np.array_equal(se3_log(PoseSE3.identity()), np.zeros(6))


def test_exp_log_roundtrip_small_twists(rng):
    for _ in range(200):
        xi = rng.uniform(-0.5, 0.5, 6)
        back = se3_log(se3_exp(xi))
        assert np.allclose(back, xi, atol=1e-12)


def test_log_raises_at_pi_rotation():
    p = se3_exp([np.pi, 0.0, 0.0, 0.0, 0.0, 0.0])
    with pytest.raises(NearSingularRotation):
        se3_log(p)


def test_exp_log_bijective_below_pi(rng):
    # bijectivity holds up to angle pi - 1e-3 within 1e-9
    for _ in range(300):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0.0, np.pi - 1e-3)
        xi = np.concatenate([axis * angle, rng.uniform(-3, 3, 3)])
        p = se3_exp(xi)
        q = se3_exp(se3_log(p))
        assert np.abs(q.rotation - p.rotation).max() < 1e-9
        assert np.abs(q.translation - p.translation).max() < 1e-9


def test_compose_with_identity():
    rng = np.random.default_rng(3)
    p = random_pose(rng)
    q = compose(p, PoseSE3.identity())
    assert np.allclose(q.rotation, p.rotation, atol=1e-15)
    assert np.allclose(q.translation, p.translation, atol=1e-15)


def test_compose_with_inverse_is_identity(rng):
    for _ in range(50):
        p = random_pose(rng)
        q = compose(p, inverse(p))
        assert np.abs(q.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(q.translation).max() < 1e-9


def test_pure_translations_commute_and_sum():
    a = se3_exp([0, 0, 0, 1.0, -2.0, 0.5])
    b = se3_exp([0, 0, 0, 0.25, 4.0, -1.0])
    ab = compose(a, b)
    ba = compose(b, a)
    assert np.allclose(ab.translation, [1.25, 2.0, -0.5], atol=1e-15)
    assert np.allclose(ab.translation, ba.translation, atol=1e-15)


def test_group_laws_over_random_poses(rng):
    # associativity, identity, inverse within 1e-9 over 1000 poses
    poses = [random_pose(rng) for _ in range(1000)]
    for i in range(0, 999, 3):
        a, b, c = poses[i], poses[i + 1], poses[i + 2]
        lhs = compose(compose(a, b), c).matrix()
        rhs = compose(a, compose(b, c)).matrix()
        assert np.abs(lhs - rhs).max() < 1e-9
    for p in poses[:100]:
        assert np.abs(compose(p, inverse(p)).matrix() - np.eye(4)).max() < 1e-9
        assert np.abs(compose(inverse(p), p).matrix() - np.eye(4)).max() < 1e-9


def test_pose_constructor_validates():
    with pytest.raises(NonRigid):
        PoseSE3(np.eye(3) * 1.001, np.zeros(3))
    bad = np.eye(3)
    bad = bad[:, [1, 0, 2]]  # det = -1 permutation
    with pytest.raises(NonRigid):
        PoseSE3(bad, np.zeros(3))


def test_pose_invariants_on_random_poses(rng):
    for _ in range(100):
        p = random_pose(rng)
        r = p.rotation
        assert np.abs(r.T @ r - np.eye(3)).max() < 1e-6
        assert abs(np.linalg.det(r) - 1.0) < 1e-6


def test_rotation_angle_matches_construction(rng):
    for _ in range(100):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0, np.pi - 1e-4)
        p = se3_exp(np.concatenate([axis * angle, np.zeros(3)]))
        assert abs(rotation_angle(p.rotation) - angle) < 1e-9


def test_nearest_rotation_fixes_drift(rng):
    p = random_pose(rng)
    drifted = p.rotation + rng.standard_normal((3, 3)) * 1e-4
    fixed = nearest_rotation(drifted)
    assert np.abs(fixed.T @ fixed - np.eye(3)).max() < 1e-12
    assert np.abs(fixed - p.rotation).max() < 1e-3
