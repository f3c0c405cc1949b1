"""SE(3) pose algebra: rotation-matrix poses, twists, exp/log maps.

Twist layout is ``(wx, wy, wz, vx, vy, vz)``: rotation (axis-angle, radians)
first, translation second.  ``se3_exp`` is the proper SE(3) exponential
(translation through the left Jacobian), so ``se3_log`` is its exact inverse
away from the pi-rotation singularity.
"""

import numpy as np

from .errors import NearSingularRotation, NonRigid, ValidationError

_ORTHO_TOL = 1e-6


def _skew(w):
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


class PoseSE3:
    """Rigid transform: x -> rotation @ x + translation."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation, translation, validate=True):
        R = np.ascontiguousarray(rotation, dtype=np.float64)
        t = np.ascontiguousarray(translation, dtype=np.float64).reshape(3)
        if validate:
            if R.shape != (3, 3):
                raise ValidationError("rotation must be 3x3")
            err = np.abs(R.T @ R - np.eye(3)).max()
            if err >= _ORTHO_TOL:
                raise NonRigid(f"rotation not orthonormal (|R^T R - I| = {err:.2e})")
            det = np.linalg.det(R)
            if abs(det - 1.0) >= _ORTHO_TOL:
                raise NonRigid(f"rotation determinant {det:.8f} != 1")
        R.flags.writeable = False
        t.flags.writeable = False
        self.rotation = R
        self.translation = t

    @staticmethod
    def identity():
        return PoseSE3(np.eye(3), np.zeros(3), validate=False)

    def apply(self, points):
        """Transform (..., 3) points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __repr__(self):
        return f"PoseSE3(t={self.translation}, R=\n{self.rotation})"


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Composition a∘b: first apply b, then a."""
    return PoseSE3(a.rotation @ b.rotation,
                   a.rotation @ b.translation + a.translation,
                   validate=False)


def inverse(p: PoseSE3) -> PoseSE3:
    rt = p.rotation.T
    return PoseSE3(rt, -rt @ p.translation, validate=False)


def so3_exp(omega):
    """Rodrigues rotation about omega/|omega| by |omega| radians."""
    w = np.asarray(omega, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(w)
    S = _skew(w)
    if theta < 1e-8:
        # second-order series keeps orthonormality to machine precision
        return np.eye(3) + S + 0.5 * (S @ S)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * S + b * (S @ S)


def so3_log(R):
    """Axis-angle of a rotation matrix; raises near the pi singularity."""
    R = np.asarray(R, dtype=np.float64)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(vee)              # sin(theta)
    c = 0.5 * (np.trace(R) - 1.0)        # cos(theta)
    theta = np.arctan2(s, c)
    if theta >= np.pi - 1e-6:
        raise NearSingularRotation(
            f"rotation angle {theta:.9f} within 1e-6 of pi")
    if theta < 1e-8:
        return vee * (1.0 + theta * theta / 6.0)
    return vee * (theta / s)


def _left_jacobian(w, theta):
    S = _skew(w)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * S + (S @ S) / 6.0
    t2 = theta * theta
    a = (1.0 - np.cos(theta)) / t2
    b = (theta - np.sin(theta)) / (t2 * theta)
    return np.eye(3) + a * S + b * (S @ S)


def _left_jacobian_inv(w, theta):
    S = _skew(w)
    if theta < 1e-6:
        return np.eye(3) - 0.5 * S + (S @ S) / 12.0
    t2 = theta * theta
    coef = 1.0 / t2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) - 0.5 * S + coef * (S @ S)


def se3_exp(twist) -> PoseSE3:
    """Exponential map of a 6-vector twist onto SE(3)."""
    xi = np.asarray(twist, dtype=np.float64).reshape(6)
    w = xi[:3]
    v = xi[3:]
    theta = np.linalg.norm(w)
    R = so3_exp(w)
    t = _left_jacobian(w, theta) @ v
    return PoseSE3(R, t, validate=False)


def se3_log(pose: PoseSE3):
    """Inverse of :func:`se3_exp`; raises NearSingularRotation at angle
    >= pi - 1e-6."""
    w = so3_log(pose.rotation)
    theta = np.linalg.norm(w)
    v = _left_jacobian_inv(w, theta) @ pose.translation
    return np.concatenate([w, v])


def rotation_angle(R) -> float:
    """Rotation angle in radians, robust over [0, pi]."""
    R = np.asarray(R, dtype=np.float64)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(vee)
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def nearest_rotation(M):
    """Orthogonal polar factor of M (nearest rotation in Frobenius norm)."""
    u, _, vt = np.linalg.svd(np.asarray(M, dtype=np.float64))
    R = u @ vt
    if np.linalg.det(R) < 0:
        u[:, -1] = -u[:, -1]
        R = u @ vt
    return R
