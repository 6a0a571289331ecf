"""Full navigation state, 21-dim error layout, and error injection/extraction.

Three error parameterizations are supported:

* right-invariant (``RIEKF``): ``chi = Exp(dx) * chi_hat`` on SE_2(3) and
  ``R_ab = exp(dtheta_a) R_ab_hat``;
* left-invariant (``LIEKF``): ``chi = chi_hat * Exp(dx)`` and
  ``R_ab = R_ab_hat exp(dtheta_a)``;
* standard error state (``ESEKF``): ``R = R_hat exp(dtheta)`` with additive
  velocity and position.

Biases and wind are additive in every variant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .lie import (
    SE23,
    _exp,
    _jl,
    se23_log,
    skew,
    so3_log,
)

N_ERR = 21
ATT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)
AIR = slice(15, 18)
WIND = slice(18, 21)
NAV = slice(0, 9)

BLOCKS = {
    "att": ATT,
    "vel": VEL,
    "pos": POS,
    "bg": BG,
    "ba": BA,
    "air": AIR,
    "wind": WIND,
}


class Variant(str, enum.Enum):
    RIEKF = "RIEKF"
    LIEKF = "LIEKF"
    ESEKF = "ESEKF"

    @classmethod
    def parse(cls, value) -> Variant:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown filter variant {value!r}") from None


def _vec3():
    return field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class FullState:
    """Pose, velocity, IMU biases, airflow rotation and wind.

    ``R_bn`` maps body to navigation frame, ``R_ab`` maps the airflow frame
    to the body frame.
    """

    R_bn: np.ndarray = field(default_factory=lambda: np.eye(3))
    v_n: np.ndarray = _vec3()
    p_n: np.ndarray = _vec3()
    b_g: np.ndarray = _vec3()
    b_a: np.ndarray = _vec3()
    R_ab: np.ndarray = field(default_factory=lambda: np.eye(3))
    v_wind: np.ndarray = _vec3()

    def __post_init__(self):
        for name in ("R_bn", "v_n", "p_n", "b_g", "b_a", "R_ab", "v_wind"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))

    @classmethod
    def _make(cls, R_bn, v_n, p_n, b_g, b_a, R_ab, v_wind) -> FullState:
        # Trusted constructor for hot paths: arrays are used as given.
        obj = object.__new__(cls)
        setattr_ = object.__setattr__
        setattr_(obj, "R_bn", R_bn)
        setattr_(obj, "v_n", v_n)
        setattr_(obj, "p_n", p_n)
        setattr_(obj, "b_g", b_g)
        setattr_(obj, "b_a", b_a)
        setattr_(obj, "R_ab", R_ab)
        setattr_(obj, "v_wind", v_wind)
        return obj

    def replace(self, **changes) -> FullState:
        return replace(self, **changes)

    @property
    def nav(self) -> SE23:
        return SE23(self.R_bn, self.v_n, self.p_n)

    def is_valid(self, tol=1e-9) -> bool:
        for R in (self.R_bn, self.R_ab):
            if not np.allclose(R.T @ R, np.eye(3), atol=tol):
                return False
            if abs(np.linalg.det(R) - 1.0) > tol:
                return False
        return all(
            np.all(np.isfinite(x)) for x in (self.v_n, self.p_n, self.b_g, self.b_a, self.v_wind)
        )


def _checked(dx):
    dx = np.asarray(dx, dtype=float)
    if dx.shape != (N_ERR,):
        raise ValueError(f"error vector must have shape ({N_ERR},), got {dx.shape}")
    if not np.isfinite(dx).all():
        raise ValueError("error vector must be finite")
    return dx


def inject_error_right(est: FullState, dx) -> FullState:
    """``chi = est [+] dx`` with the right-invariant retraction."""
    dx = _checked(dx)
    E = _exp(dx[ATT])
    J = _jl(dx[ATT])
    return FullState._make(
        E @ est.R_bn,
        E @ est.v_n + J @ dx[VEL],
        E @ est.p_n + J @ dx[POS],
        est.b_g + dx[BG],
        est.b_a + dx[BA],
        _exp(dx[AIR]) @ est.R_ab,
        est.v_wind + dx[WIND],
    )


def extract_error_right(true: FullState, est: FullState) -> np.ndarray:
    """Inverse of :func:`inject_error_right`."""
    dx = np.empty(N_ERR)
    dx[NAV] = se23_log(true.nav @ est.nav.inverse())
    dx[BG] = true.b_g - est.b_g
    dx[BA] = true.b_a - est.b_a
    dx[AIR] = so3_log(true.R_ab @ est.R_ab.T)
    dx[WIND] = true.v_wind - est.v_wind
    return dx


def inject_error_left(est: FullState, dx) -> FullState:
    dx = _checked(dx)
    RJ = est.R_bn @ _jl(dx[ATT])
    return FullState._make(
        est.R_bn @ _exp(dx[ATT]),
        est.v_n + RJ @ dx[VEL],
        est.p_n + RJ @ dx[POS],
        est.b_g + dx[BG],
        est.b_a + dx[BA],
        est.R_ab @ _exp(dx[AIR]),
        est.v_wind + dx[WIND],
    )


def extract_error_left(true: FullState, est: FullState) -> np.ndarray:
    dx = np.empty(N_ERR)
    dx[NAV] = se23_log(est.nav.inverse() @ true.nav)
    dx[BG] = true.b_g - est.b_g
    dx[BA] = true.b_a - est.b_a
    dx[AIR] = so3_log(est.R_ab.T @ true.R_ab)
    dx[WIND] = true.v_wind - est.v_wind
    return dx


def inject_error_es(est: FullState, dx) -> FullState:
    dx = _checked(dx)
    return FullState._make(
        est.R_bn @ _exp(dx[ATT]),
        est.v_n + dx[VEL],
        est.p_n + dx[POS],
        est.b_g + dx[BG],
        est.b_a + dx[BA],
        est.R_ab @ _exp(dx[AIR]),
        est.v_wind + dx[WIND],
    )


def extract_error_es(true: FullState, est: FullState) -> np.ndarray:
    dx = np.empty(N_ERR)
    dx[ATT] = so3_log(est.R_bn.T @ true.R_bn)
    dx[VEL] = true.v_n - est.v_n
    dx[POS] = true.p_n - est.p_n
    dx[BG] = true.b_g - est.b_g
    dx[BA] = true.b_a - est.b_a
    dx[AIR] = so3_log(est.R_ab.T @ true.R_ab)
    dx[WIND] = true.v_wind - est.v_wind
    return dx


_INJECT = {
    Variant.RIEKF: inject_error_right,
    Variant.LIEKF: inject_error_left,
    Variant.ESEKF: inject_error_es,
}
_EXTRACT = {
    Variant.RIEKF: extract_error_right,
    Variant.LIEKF: extract_error_left,
    Variant.ESEKF: extract_error_es,
}


def inject_error(variant, est: FullState, dx) -> FullState:
    return _INJECT[Variant.parse(variant)](est, dx)


def extract_error(variant, true: FullState, est: FullState) -> np.ndarray:
    return _EXTRACT[Variant.parse(variant)](true, est)


def error_map_from_es(variant, est: FullState) -> np.ndarray:
    """Linear map from ES-EKF error coordinates to ``variant`` coordinates.

    The ES parameterization (body-frame attitude and airflow errors,
    additive velocity and position) is the physical reading of a prior; a
    covariance ``P`` stated in it becomes ``T P T^T`` for another variant.
    Exact to first order at ``est``.
    """
    variant = Variant.parse(variant)
    T = np.eye(N_ERR)
    R = est.R_bn
    if variant is Variant.RIEKF:
        T[ATT, ATT] = R
        T[VEL, ATT] = skew(est.v_n) @ R
        T[POS, ATT] = skew(est.p_n) @ R
        T[AIR, AIR] = est.R_ab
    elif variant is Variant.LIEKF:
        T[VEL, VEL] = R.T
        T[POS, POS] = R.T
    return T


def covariance_from_es(variant, est: FullState, P) -> np.ndarray:
    """Express an ES-coordinate covariance in ``variant`` coordinates."""
    T = error_map_from_es(variant, est)
    out = T @ np.asarray(P, dtype=float) @ T.T
    return 0.5 * (out + out.T)


__all__ = [
    "ATT",
    "AIR",
    "BA",
    "BG",
    "BLOCKS",
    "FullState",
    "N_ERR",
    "NAV",
    "POS",
    "VEL",
    "Variant",
    "WIND",
    "covariance_from_es",
    "error_map_from_es",
    "extract_error",
    "extract_error_es",
    "extract_error_left",
    "extract_error_right",
    "inject_error",
    "inject_error_es",
    "inject_error_left",
    "inject_error_right",
]
