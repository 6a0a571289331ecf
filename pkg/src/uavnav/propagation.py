"""Strapdown mechanization and error-state transition models.

The mechanization integrates bias-corrected rates over one IMU interval with
the inputs held constant::

    R+ = R exp((w - b_g) dt)
    v+ = v + (R (a - b_a) + g) dt
    p+ = p + v dt + 1/2 (R (a - b_a) + g) dt^2

This one-step map is group-affine on SE_2(3), so with zero bias errors the
right-invariant error evolves independently of the trajectory.

Continuous error dynamics ``d(dx)/dt = F dx + G n`` are provided for the
right-invariant, left-invariant and standard error-state filters.  Only the
9x9 navigation block ``F_nn``, the 9x6 bias coupling ``F_nb`` and the 9x6
IMU-noise input ``G_n`` depend on the state; every other block of ``F`` is
zero and every other block of ``G`` is identity, which the covariance kernels
exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import GRAVITY
from .lie import _exp, skew, so3_exp
from .state import N_ERR, NAV, FullState, Variant

MAX_DT = 0.1

_I3 = np.eye(3)


@dataclass(frozen=True)
class ImuSample:
    """Body angular rate ``omega`` (rad/s) and specific force ``accel`` (m/s^2)."""

    t: float
    omega: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float))


@dataclass(frozen=True)
class ProcessNoise:
    """Continuous-time noise intensities.

    Each field is a per-axis variance density (scalar or 3-vector):
    gyro ``(rad/s)^2 s``, accel ``(m/s^2)^2 s``, gyro-bias walk
    ``(rad/s)^2 / s``, accel-bias walk ``(m/s^2)^2 / s``, airflow-rotation
    walk ``rad^2 / s`` and wind walk ``(m/s)^2 / s``.
    """

    sigma_g2: float | np.ndarray = 0.0
    sigma_a2: float | np.ndarray = 0.0
    sigma_bg2: float | np.ndarray = 0.0
    sigma_ba2: float | np.ndarray = 0.0
    sigma_tha2: float | np.ndarray = 0.0
    sigma_vw2: float | np.ndarray = 0.0

    def __post_init__(self):
        for name in ("sigma_g2", "sigma_a2", "sigma_bg2", "sigma_ba2", "sigma_tha2", "sigma_vw2"):
            val = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,)).copy()
            if np.any(val < 0) or not np.all(np.isfinite(val)):
                raise ValueError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, val)

    def diag(self) -> np.ndarray:
        """18-vector in the noise order ``(n_g, n_a, n_bg, n_ba, n_tha, n_vw)``."""
        return np.concatenate(
            [self.sigma_g2, self.sigma_a2, self.sigma_bg2, self.sigma_ba2, self.sigma_tha2, self.sigma_vw2]
        )


@dataclass(frozen=True)
class TransitionPair:
    Phi: np.ndarray
    Qd: np.ndarray


def _flow(state: FullState, omega, accel, dt) -> FullState:
    # Unchecked one-step map; dt may be negative (used by derivative tests).
    w = np.asarray(omega, dtype=float) - state.b_g
    a = state.R_bn @ (np.asarray(accel, dtype=float) - state.b_a) + GRAVITY
    return FullState._make(
        state.R_bn @ _exp(w * dt),
        state.v_n + a * dt,
        state.p_n + (state.v_n + 0.5 * dt * a) * dt,
        state.b_g,
        state.b_a,
        state.R_ab,
        state.v_wind,
    )


def strapdown_step(state: FullState, u: ImuSample, dt: float) -> FullState:
    """Propagate the state over ``dt`` seconds with IMU sample ``u``.

    Raises
    ------
    ValueError
        If ``dt`` is not in ``(0, MAX_DT]`` or the sample is not finite.
    """
    if not (dt > 0.0) or dt > MAX_DT or not math.isfinite(dt):
        raise ValueError(f"dt must lie in (0, {MAX_DT}], got {dt!r}")
    if not (np.all(np.isfinite(u.omega)) and np.all(np.isfinite(u.accel))):
        raise ValueError("IMU sample must be finite")
    return _flow(state, u.omega, u.accel, dt)


def nav_blocks(variant, R, v, p, omega_hat, accel_hat):
    """State-dependent blocks ``(F_nn, F_nb, G_n)`` of the error dynamics.

    ``omega_hat`` and ``accel_hat`` are the bias-corrected IMU rates.
    """
    variant = Variant.parse(variant)
    Fnn = np.zeros((9, 9))
    Fnb = np.zeros((9, 6))
    Gn = np.zeros((9, 6))
    if variant is Variant.RIEKF:
        Fnn[3:6, 0:3] = skew(GRAVITY)
        Fnn[6:9, 3:6] = _I3
        vx_R = skew(v) @ R
        px_R = skew(p) @ R
        Fnb[0:3, 0:3] = -R
        Fnb[3:6, 0:3] = -vx_R
        Fnb[3:6, 3:6] = -R
        Fnb[6:9, 0:3] = -px_R
        Gn[:] = Fnb
    elif variant is Variant.LIEKF:
        wx = skew(omega_hat)
        Fnn[0:3, 0:3] = -wx
        Fnn[3:6, 0:3] = -skew(accel_hat)
        Fnn[3:6, 3:6] = -wx
        Fnn[6:9, 3:6] = _I3
        Fnn[6:9, 6:9] = -wx
        Fnb[0:3, 0:3] = -_I3
        Fnb[3:6, 3:6] = -_I3
        Gn[:] = Fnb
    else:
        Fnn[0:3, 0:3] = -skew(omega_hat)
        Fnn[3:6, 0:3] = -R @ skew(accel_hat)
        Fnn[6:9, 3:6] = _I3
        Fnb[0:3, 0:3] = -_I3
        Fnb[3:6, 3:6] = -R
        Gn[:] = Fnb
    return Fnn, Fnb, Gn


def continuous_model(variant, state: FullState, u: ImuSample):
    """Full ``F`` (21x21) and ``G`` (21x18) at the current estimate."""
    w = u.omega - state.b_g
    a = u.accel - state.b_a
    Fnn, Fnb, Gn = nav_blocks(variant, state.R_bn, state.v_n, state.p_n, w, a)
    F = np.zeros((N_ERR, N_ERR))
    F[NAV, NAV] = Fnn
    F[NAV, 9:15] = Fnb
    G = np.zeros((N_ERR, 18))
    G[NAV, 0:6] = Gn
    G[9:21, 6:18] = np.eye(12)
    return F, G


def _discretize(F, G, q: ProcessNoise, dt) -> TransitionPair:
    # Phi = I + F dt + 1/2 (F dt)^2 and one-point Qd = Phi G Q G^T Phi^T dt.
    Fdt = F * dt
    Phi = np.eye(N_ERR) + Fdt + 0.5 * Fdt @ Fdt
    Qc = (G * q.diag()) @ G.T
    Qd = Phi @ Qc @ Phi.T * dt
    return TransitionPair(Phi, 0.5 * (Qd + Qd.T))


def _transition(variant, state, u, dt, q):
    # The state-dependent blocks are evaluated at the mid-interval estimate,
    # which makes the bias coupling of Phi second-order accurate.
    mid = _flow(state, u.omega, u.accel, 0.5 * dt)
    F, G = continuous_model(variant, mid, u)
    return _discretize(F, G, q, dt)


def error_jacobians_right(state: FullState, u: ImuSample, dt: float, q: ProcessNoise) -> TransitionPair:
    """Right-invariant transition over ``dt``.

    The navigation block of ``F`` is ``[[0,0,0],[[g]x,0,0],[0,I,0]]``; its
    second-order discretization is exact and places ``1/2 [g]x dt^2`` in the
    position/attitude entry of ``Phi``.  The bias coupling uses the
    mid-interval estimate.
    """
    return _transition(Variant.RIEKF, state, u, dt, q)


def error_jacobians_left(state: FullState, u: ImuSample, dt: float, q: ProcessNoise) -> TransitionPair:
    return _transition(Variant.LIEKF, state, u, dt, q)


def es_ekf_jacobians(state: FullState, u: ImuSample, dt: float, q: ProcessNoise) -> TransitionPair:
    """Standard error-state EKF transition (body-frame attitude error)."""
    return _transition(Variant.ESEKF, state, u, dt, q)


_JACOBIANS = {
    Variant.RIEKF: error_jacobians_right,
    Variant.LIEKF: error_jacobians_left,
    Variant.ESEKF: es_ekf_jacobians,
}


def error_jacobians(variant, state, u, dt, q) -> TransitionPair:
    return _JACOBIANS[Variant.parse(variant)](state, u, dt, q)


def propagate_covariance(P, tp: TransitionPair) -> np.ndarray:
    """``Phi P Phi^T + Qd``, symmetrized."""
    out = tp.Phi @ P @ tp.Phi.T + tp.Qd
    return 0.5 * (out + out.T)


__all__ = [
    "ImuSample",
    "MAX_DT",
    "ProcessNoise",
    "TransitionPair",
    "continuous_model",
    "error_jacobians",
    "error_jacobians_left",
    "error_jacobians_right",
    "es_ekf_jacobians",
    "nav_blocks",
    "propagate_covariance",
    "strapdown_step",
]
