"""Reference numpy implementation of the covariance kernels.

The compiled module ``_kernels`` provides the same two functions with the
same arguments and results; :mod:`uavnav._backend` picks one at import.
"""

import numpy as np

from .lie import so3_exp
from .propagation import nav_blocks
from .state import N_ERR, FullState, Variant
from .state import inject_error as _inject_full

VARIANT_CODES = {Variant.RIEKF: 0, Variant.LIEKF: 1, Variant.ESEKF: 2}
_VARIANTS = {code: var for var, code in VARIANT_CODES.items()}


def predict_covariance(variant, P, R, v, p, w, a, dt, q, g):
    """Covariance prediction over one IMU interval.

    Parameters
    ----------
    variant : int
        Filter code from ``VARIANT_CODES``.
    P : (21, 21) ndarray
        Covariance at the start of the interval.
    R, v, p : ndarray
        Estimated attitude, velocity and position at the start.
    w, a : (3,) ndarray
        Bias-corrected angular rate and specific force.
    dt : float
        Interval length.
    q : (18,) ndarray
        Noise intensities in the order ``(n_g, n_a, n_bg, n_ba, n_tha, n_vw)``.
    g : (3,) ndarray
        Gravity vector.

    Returns
    -------
    (21, 21) ndarray
        ``Phi (P + G Q G^T dt) Phi^T``, symmetrized, where ``F`` and ``G``
        are evaluated at the mid-interval estimate.
    """
    h = 0.5 * dt
    acc = R @ a + g
    Rm = R @ so3_exp(w * h)
    vm = v + acc * h
    pm = p + v * h + 0.5 * acc * h * h
    Fnn, Fnb, Gn = nav_blocks(_VARIANTS[variant], Rm, vm, pm, w, a)

    A = np.eye(9) + Fnn * dt + 0.5 * (Fnn @ Fnn) * dt * dt
    B = Fnb * dt + 0.5 * (Fnn @ Fnb) * dt * dt
    M = np.array(P, dtype=float)
    M[:9, :9] += (Gn * q[:6]) @ Gn.T * dt
    idx = np.arange(9, N_ERR)
    M[idx, idx] += q[6:] * dt

    T = M.copy()
    T[:9] = A @ M[:9] + B @ M[9:15]
    out = T.copy()
    out[:, :9] = T[:, :9] @ A.T + T[:, 9:15] @ B.T
    return 0.5 * (out + out.T)


def kalman_update(P, H, Rm, z, gate, max_cond):
    """Joseph-form Kalman update.

    Returns
    -------
    status : int
        0 applied, 1 rejected by the gate (``z^T S^-1 z > gate``),
        2 innovation covariance not positive definite or 1-norm condition
        number above ``max_cond``.
    dx : (21,) ndarray
        Error-state correction (zero unless applied).
    P_new : (21, 21) ndarray
        Updated covariance (a copy of ``P`` unless applied).
    d2 : float
        Squared Mahalanobis distance of the innovation (0 when status is 2).
    """
    k = H.shape[0]
    if k < 1 or H.shape[1] != N_ERR or Rm.shape != (k, k) or z.shape != (k,):
        raise ValueError("inconsistent measurement dimensions")
    PHt = P @ H.T
    S = H @ PHt + Rm
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return 2, np.zeros(N_ERR), P.copy(), 0.0
    Linv = np.linalg.inv(L)
    Sinv = Linv.T @ Linv
    cond = np.linalg.norm(S, 1) * np.linalg.norm(Sinv, 1)
    if not cond <= max_cond:
        return 2, np.zeros(N_ERR), P.copy(), 0.0
    d2 = float(z @ Sinv @ z)
    if d2 > gate:
        return 1, np.zeros(N_ERR), P.copy(), d2
    K = PHt @ Sinv
    dx = K @ z
    L = np.eye(N_ERR) - K @ H
    out = L @ P @ L.T + K @ Rm @ K.T
    return 0, dx, 0.5 * (out + out.T), d2


def inject_error(variant, R, v, p, R_ab, dx):
    """Apply the error ``dx`` to the nav part and airflow rotation.

    Returns the updated ``(R, v, p, R_ab)``; biases and wind are additive
    and left to the caller.
    """
    est = FullState._make(R, v, p, np.zeros(3), np.zeros(3), R_ab, np.zeros(3))
    out = _inject_full(_VARIANTS[variant], est, dx)
    return out.R_bn, out.v_n, out.p_n, out.R_ab
