"""SO(3) and SE_2(3) matrix Lie group primitives.

Tangent vectors of SE_2(3) are 9-vectors ordered ``(theta, dv, dp)``.
Rotations are plain ``(3, 3)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NearSingularityError

SMALL_ANGLE = 1e-6
PI_MARGIN = 1e-6

_I3 = np.eye(3)


def _check_finite(x, name="input"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def skew(w):
    """Skew-symmetric matrix such that ``skew(a) @ b == cross(a, b)``."""
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m):
    """Inverse of :func:`skew` (uses the antisymmetric part)."""
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def so3_exp(theta):
    """Rotation matrix ``exp([theta]x)`` by Rodrigues' formula."""
    return _exp(_check_finite(theta, "rotation vector"))


def _exp(theta):
    # unchecked so3_exp for internal hot paths
    x, y, z = theta
    phi2 = x * x + y * y + z * z
    phi = math.sqrt(phi2)
    if phi < SMALL_ANGLE:
        a = 1.0
        b = 0.5
    else:
        a = math.sin(phi) / phi
        b = (1.0 - math.cos(phi)) / phi2
    # R = I + a K + b K^2, with K^2 = theta theta^T - phi^2 I
    return np.array(
        [
            [1.0 + b * (x * x - phi2), -a * z + b * x * y, a * y + b * x * z],
            [a * z + b * x * y, 1.0 + b * (y * y - phi2), -a * x + b * y * z],
            [-a * y + b * x * z, a * x + b * y * z, 1.0 + b * (z * z - phi2)],
        ]
    )


def rotation_angle(R) -> float:
    """Angle of the rotation ``R`` in ``[0, pi]``."""
    s = 0.5 * math.sqrt(
        (R[2, 1] - R[1, 2]) ** 2 + (R[0, 2] - R[2, 0]) ** 2 + (R[1, 0] - R[0, 1]) ** 2
    )
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    return math.atan2(s, c)


def so3_log(R):
    """Rotation vector of ``R``.

    Raises
    ------
    NearSingularityError
        If the rotation angle is within ``PI_MARGIN`` of pi, where the axis
        is ambiguous.
    """
    R = _check_finite(R, "rotation")
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = 0.5 * math.sqrt(w @ w)
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    phi = math.atan2(s, c)
    if phi > math.pi - PI_MARGIN:
        raise NearSingularityError(f"rotation angle {phi:.9f} too close to pi")
    if phi < SMALL_ANGLE:
        return 0.5 * (1.0 + phi * phi / 6.0) * w
    return (0.5 * phi / s) * w


def left_jacobian(theta):
    """Left Jacobian of SO(3) at ``theta``."""
    return _jl(_check_finite(theta, "rotation vector"))


def _jl(theta):
    phi = math.sqrt(theta @ theta)
    K = skew(theta)
    if phi < SMALL_ANGLE:
        return _I3 + 0.5 * K + (K @ K) / 6.0
    a = theta / phi
    s = math.sin(phi) / phi
    return s * _I3 + (1.0 - s) * np.outer(a, a) + ((1.0 - math.cos(phi)) / phi) * skew(a)


def left_jacobian_inverse(theta):
    """Inverse of :func:`left_jacobian`, valid for ``|theta| < 2 pi``."""
    theta = _check_finite(theta, "rotation vector")
    phi = math.sqrt(theta @ theta)
    K = skew(theta)
    if phi < SMALL_ANGLE:
        return _I3 - 0.5 * K + (K @ K) / 12.0
    a = theta / phi
    half = 0.5 * phi
    hc = half / math.tan(half)
    return hc * _I3 + (1.0 - hc) * np.outer(a, a) - half * skew(a)


@dataclass(frozen=True)
class SE23:
    """Extended pose ``(R, v, p)`` embedded as a 5x5 matrix."""

    R: np.ndarray
    v: np.ndarray
    p: np.ndarray

    @classmethod
    def identity(cls) -> SE23:
        return cls(np.eye(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> SE23:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3].copy(), m[:3, 3].copy(), m[:3, 4].copy())

    def matrix(self) -> np.ndarray:
        m = np.eye(5)
        m[:3, :3] = self.R
        m[:3, 3] = self.v
        m[:3, 4] = self.p
        return m

    def __matmul__(self, other: SE23) -> SE23:
        return SE23(self.R @ other.R, self.R @ other.v + self.v, self.R @ other.p + self.p)

    def inverse(self) -> SE23:
        Rt = self.R.T
        return SE23(Rt, -Rt @ self.v, -Rt @ self.p)

    def adjoint(self) -> np.ndarray:
        """9x9 adjoint so that ``g exp(xi) g^-1 = exp(Ad_g xi)``."""
        return se23_adjoint(self.R, self.v, self.p)


def se23_hat(xi):
    """5x5 Lie algebra matrix of a 9-vector ``(theta, dv, dp)``."""
    xi = np.asarray(xi, dtype=float)
    m = np.zeros((5, 5))
    m[:3, :3] = skew(xi[0:3])
    m[:3, 3] = xi[3:6]
    m[:3, 4] = xi[6:9]
    return m


def se23_vee(m):
    m = np.asarray(m, dtype=float)
    return np.concatenate([vee(m[:3, :3]), m[:3, 3], m[:3, 4]])


def se23_exp(xi) -> SE23:
    """Exponential map; the translations are ``J_l(theta)`` times ``dv``, ``dp``."""
    xi = _check_finite(xi, "tangent vector")
    theta = xi[0:3]
    J = left_jacobian(theta)
    return SE23(so3_exp(theta), J @ xi[3:6], J @ xi[6:9])


def se23_log(g: SE23) -> np.ndarray:
    theta = so3_log(g.R)
    Jinv = left_jacobian_inverse(theta)
    return np.concatenate([theta, Jinv @ g.v, Jinv @ g.p])


def se23_adjoint(R, v, p):
    A = np.zeros((9, 9))
    A[0:3, 0:3] = R
    A[3:6, 0:3] = skew(v) @ R
    A[3:6, 3:6] = R
    A[6:9, 0:3] = skew(p) @ R
    A[6:9, 6:9] = R
    return A


def se23_adjoint_inverse(R, v, p):
    Rt = R.T
    A = np.zeros((9, 9))
    A[0:3, 0:3] = Rt
    A[3:6, 0:3] = -Rt @ skew(v)
    A[3:6, 3:6] = Rt
    A[6:9, 0:3] = -Rt @ skew(p)
    A[6:9, 6:9] = Rt
    return A


def state_adjoint_inverse(state) -> np.ndarray:
    """21x21 map from right-invariant to left-invariant error coordinates.

    ``H_right = H_left @ state_adjoint_inverse(state)``.  The extended-pose
    block is the SE_2(3) inverse adjoint; the airflow rotation block is
    ``R_ab^T`` because the two filters place its error on opposite sides;
    biases and wind are additive in both and map through identity.
    """
    A = np.eye(21)
    A[0:9, 0:9] = se23_adjoint_inverse(state.R_bn, state.v_n, state.p_n)
    A[15:18, 15:18] = state.R_ab.T
    return A
