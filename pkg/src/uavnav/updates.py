"""Measurement models, the Kalman update and the multi-rate filter.

Conventions
-----------
Every sensor has an observation function ``h`` and the innovation is
``z = y - h(x_hat)``.  ``H`` is the Jacobian of ``h`` with respect to the
variant's injected error, so the correction ``dx = K z`` is injected with
:func:`uavnav.state.inject_error`.

Two pseudo-measurements are used:

* airspeed: ``0 = v - R R_ab [V, 0, 0] - v_wind`` (wind triangle);
* airflow: the predicted angles ``(alpha, beta)`` give a rotation
  ``R_ab(alpha, beta)`` compared with the estimate on SO(3).

The right-invariant magnetometer innovation is expressed in the navigation
frame (``R_hat m - e1``); the left and standard variants compare in body
axes (``m - R_hat^T e1``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .airdata import (
    AeroContext,
    AeroCoefficients,
    AirframeParams,
    ChannelPredictor,
    LsPredictor,
    LstmPredictor,
    load_lstm_weights,
    rab_from_angles,
)
from .config import FilterConfig
from .constants import (
    BARO_EXPONENT,
    BARO_SCALE_HEIGHT,
    GRAVITY,
    HEIGHT_ROW,
    MAG_REFERENCE,
    P0_BAR,
)
from .errors import SingularInnovationError, StaleMeasurementError
from .lie import skew, so3_log
from .propagation import MAX_DT, ImuSample, _flow
from .state import (
    AIR,
    ATT,
    BA,
    BG,
    N_ERR,
    POS,
    VEL,
    WIND,
    FullState,
    Variant,
    covariance_from_es,
    inject_error,
)

log = logging.getLogger(__name__)

MAX_INNOVATION_COND = 1e12
MAX_AIRFLOW_ANGLE = 0.5  # rad
TIME_TOL = 1e-9

_I3 = np.eye(3)


# Payloads -----------------------------------------------------------------


@dataclass(frozen=True)
class GnssFix:
    p_n: np.ndarray
    v_n: np.ndarray


@dataclass(frozen=True)
class BaroReading:
    P_s: float  # bar


@dataclass(frozen=True)
class MagReading:
    m_b: np.ndarray


@dataclass(frozen=True)
class AirspeedReading:
    V_TAS: float


@dataclass(frozen=True)
class AeroReading:
    """Control deflections and channel angle estimates (rad).

    ``alpha_true``/``beta_true`` are carried for training and evaluation
    only and are never used by the filter.
    """

    delta_e: float
    delta_r: float
    alpha: float
    beta: float
    alpha_true: float = math.nan
    beta_true: float = math.nan


_KINDS = {
    ImuSample: "IMU",
    GnssFix: "GNSS",
    BaroReading: "BARO",
    MagReading: "MAG",
    AirspeedReading: "TAS",
    AeroReading: "AERO",
}
KINDS = tuple(_KINDS.values())


@dataclass(frozen=True)
class SensorEvent:
    t: float
    payload: object

    def __post_init__(self):
        if type(self.payload) not in _KINDS:
            raise TypeError(f"unsupported payload {type(self.payload).__name__}")
        if not math.isfinite(self.t):
            raise ValueError("event time must be finite")

    @property
    def kind(self) -> str:
        return _KINDS[type(self.payload)]


@dataclass(frozen=True)
class MeasurementModel:
    H: np.ndarray
    z: np.ndarray
    Rm: np.ndarray

    def __post_init__(self):
        H = np.ascontiguousarray(self.H, dtype=float)
        z = np.ascontiguousarray(np.atleast_1d(self.z), dtype=float)
        Rm = np.ascontiguousarray(np.atleast_2d(self.Rm), dtype=float)
        k = z.shape[0]
        if H.shape != (k, N_ERR) or Rm.shape != (k, k):
            raise ValueError(f"inconsistent shapes H{H.shape} z{z.shape} Rm{Rm.shape}")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(z)) and np.all(np.isfinite(Rm))):
            raise ValueError("measurement model must be finite")
        if not np.allclose(Rm, Rm.T, atol=1e-12 * max(1.0, np.abs(Rm).max())):
            raise ValueError("Rm must be symmetric")
        try:
            np.linalg.cholesky(Rm)
        except np.linalg.LinAlgError:
            raise ValueError("Rm must be positive definite") from None
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "Rm", Rm)

    @classmethod
    def _trusted(cls, H, z, Rm) -> MeasurementModel:
        # Internal builders produce well-formed contiguous arrays; only the
        # data-dependent parts can go non-finite.
        if not (math.isfinite(z.sum()) and math.isfinite(Rm.sum())):
            raise ValueError("measurement model must be finite")
        obj = object.__new__(cls)
        object.__setattr__(obj, "H", H)
        object.__setattr__(obj, "z", z)
        object.__setattr__(obj, "Rm", Rm)
        return obj


def kf_update(P, mm: MeasurementModel):
    """Kalman gain, correction and Joseph-form covariance.

    Returns
    -------
    dx : (21,) ndarray
    P_new : (21, 21) ndarray

    Raises
    ------
    SingularInnovationError
        If ``H P H^T + Rm`` is not positive definite or its 1-norm condition
        number exceeds ``MAX_INNOVATION_COND``.
    """
    P = np.ascontiguousarray(P, dtype=float)
    status, dx, P_new, _ = _backend.kalman_update(P, mm.H, mm.Rm, mm.z, math.inf, MAX_INNOVATION_COND)
    if status == 2:
        raise SingularInnovationError("innovation covariance is singular or ill-conditioned")
    return dx, P_new


# Observation functions ----------------------------------------------------


def gnss_observation(state: FullState) -> np.ndarray:
    return np.concatenate([state.v_n, state.p_n])


def baro_observation(state: FullState) -> np.ndarray:
    return np.array([HEIGHT_ROW @ state.p_n])


def mag_observation(variant, state: FullState, R_ref=None) -> np.ndarray:
    """Predicted magnetometer quantity.

    For the right-invariant variant this is ``R_ref R^T e1``, the body
    vector mapped to the navigation frame through the fixed estimate
    ``R_ref``; otherwise it is the body vector ``R^T e1``.
    """
    m_body = state.R_bn.T @ MAG_REFERENCE
    if Variant.parse(variant) is Variant.RIEKF:
        R_ref = state.R_bn if R_ref is None else R_ref
        return R_ref @ m_body
    return m_body


def airspeed_observation(state: FullState, V_TAS: float) -> np.ndarray:
    return state.v_n - state.R_bn @ (state.R_ab[:, 0] * V_TAS) - state.v_wind


def airflow_observation(variant, state: FullState, R_ab_ref) -> np.ndarray:
    """Rotation of ``state.R_ab`` relative to ``R_ab_ref`` (right or left)."""
    if Variant.parse(variant) is Variant.RIEKF:
        return so3_log(state.R_ab @ R_ab_ref.T)
    return so3_log(R_ab_ref.T @ state.R_ab)


# Model builders -----------------------------------------------------------


def _cov3(var):
    return np.diag(np.broadcast_to(np.asarray(var, dtype=float), (3,)))


def gnss_model(variant, state: FullState, fix: GnssFix, var_v, var_p) -> MeasurementModel:
    variant = Variant.parse(variant)
    H = np.zeros((6, N_ERR))
    if variant is Variant.RIEKF:
        H[0:3, ATT] = -skew(state.v_n)
        H[0:3, VEL] = _I3
        H[3:6, ATT] = -skew(state.p_n)
        H[3:6, POS] = _I3
    elif variant is Variant.LIEKF:
        H[0:3, VEL] = state.R_bn
        H[3:6, POS] = state.R_bn
    else:
        H[0:3, VEL] = _I3
        H[3:6, POS] = _I3
    y = np.concatenate([np.asarray(fix.v_n, dtype=float), np.asarray(fix.p_n, dtype=float)])
    z = y - gnss_observation(state)
    Rm = np.zeros((6, 6))
    Rm[0:3, 0:3] = _cov3(var_v)
    Rm[3:6, 3:6] = _cov3(var_p)
    return MeasurementModel._trusted(H, z, Rm)


def pressure_to_height(P_s: float) -> float:
    """Barometric height (m) of static pressure ``P_s`` (bar)."""
    if not (0.0 < P_s <= P0_BAR) or not math.isfinite(P_s):
        raise ValueError(f"static pressure {P_s!r} bar outside (0, {P0_BAR}]")
    return BARO_SCALE_HEIGHT * (1.0 - (P_s / P0_BAR) ** (1.0 / BARO_EXPONENT))


def height_to_pressure(h: float) -> float:
    """Inverse of :func:`pressure_to_height`."""
    if not h < BARO_SCALE_HEIGHT:
        raise ValueError("height above the model ceiling")
    return P0_BAR * (1.0 - h / BARO_SCALE_HEIGHT) ** BARO_EXPONENT


def baro_model(variant, state: FullState, height, var) -> MeasurementModel:
    variant = Variant.parse(variant)
    if variant is Variant.RIEKF:
        Hp = np.hstack([-skew(state.p_n), np.zeros((3, 3)), _I3])
    elif variant is Variant.LIEKF:
        Hp = np.hstack([np.zeros((3, 6)), state.R_bn])
    else:
        Hp = np.hstack([np.zeros((3, 6)), _I3])
    H = np.zeros((1, N_ERR))
    H[0, 0:9] = HEIGHT_ROW @ Hp
    z = np.array([height]) - baro_observation(state)
    return MeasurementModel._trusted(H, z, np.array([[float(var)]]))


def _unit(m):
    m = np.asarray(m, dtype=float)
    n = math.sqrt(float(m @ m))
    if not n > 0.0 or not math.isfinite(n):
        raise ValueError("magnetometer vector has zero or non-finite norm")
    return m / n


def mag_model(variant, state: FullState, m_b, var) -> MeasurementModel:
    variant = Variant.parse(variant)
    m = _unit(m_b)
    H = np.zeros((3, N_ERR))
    if variant is Variant.RIEKF:
        m_n = state.R_bn @ m
        H[:, ATT] = skew(m_n)
        z = m_n - mag_observation(variant, state)
    else:
        H[:, ATT] = skew(state.R_bn.T @ MAG_REFERENCE)
        z = m - mag_observation(variant, state)
    # isotropic noise is invariant under the frame change
    return MeasurementModel._trusted(H, z, var * _I3)


def airspeed_model(variant, state: FullState, V_TAS, var) -> MeasurementModel:
    variant = Variant.parse(variant)
    R = state.R_bn
    u = state.R_ab[:, 0] * V_TAS  # body-frame air velocity
    H = np.zeros((3, N_ERR))
    if variant is Variant.RIEKF:
        H[:, ATT] = -skew(state.v_n) + skew(R @ u)
        H[:, VEL] = _I3
        H[:, AIR] = R @ skew(u)
    else:
        H[:, ATT] = R @ skew(u)
        H[:, VEL] = R if variant is Variant.LIEKF else _I3
        H[:, AIR] = R @ state.R_ab @ skew(np.array([V_TAS, 0.0, 0.0]))
    H[:, WIND] = -_I3
    z = -airspeed_observation(state, V_TAS)
    return MeasurementModel._trusted(H, z, var * _I3)


def airflow_covariance(alpha, sigma_alpha, sigma_beta, sigma_roll):
    """Body-frame covariance of the airflow rotation error.

    An angle-of-attack error rotates about ``-y``; a sideslip error rotates
    about ``R_y(-alpha) z``; the remaining axis is weakly constrained by
    ``sigma_roll``.
    """
    Ry = rab_from_angles(alpha, 0.0)
    return Ry @ np.diag([sigma_roll**2, sigma_alpha**2, sigma_beta**2]) @ Ry.T


def airflow_model(variant, state: FullState, alpha, beta, sigmas) -> MeasurementModel:
    variant = Variant.parse(variant)
    if abs(alpha) >= MAX_AIRFLOW_ANGLE or abs(beta) >= MAX_AIRFLOW_ANGLE:
        raise ValueError(f"airflow angles ({alpha:.3f}, {beta:.3f}) rad out of range")
    R_meas = rab_from_angles(alpha, beta)
    H = np.zeros((3, N_ERR))
    H[:, AIR] = _I3
    Rm = airflow_covariance(alpha, *sigmas)
    if variant is Variant.RIEKF:
        z = so3_log(R_meas @ state.R_ab.T)
    else:
        z = so3_log(state.R_ab.T @ R_meas)
        Rm = state.R_ab.T @ Rm @ state.R_ab
    return MeasurementModel._trusted(H, z, np.ascontiguousarray(0.5 * (Rm + Rm.T)))


# Single-shot updates ------------------------------------------------------


def reset_and_feedback(state: FullState, dx, variant=Variant.RIEKF) -> FullState:
    """Inject a correction into the estimate.

    Bias corrections accumulate into ``b_g`` and ``b_a``, so subsequent
    mechanization uses the corrected rates; the error state is implicitly
    zero afterwards.
    """
    dx = np.asarray(dx, dtype=float)
    if not np.any(dx):
        return state
    return inject_error(variant, state, dx)


def _apply(variant, state, P, mm):
    dx, P_new = kf_update(P, mm)
    return reset_and_feedback(state, dx, variant), P_new


def gnss_update(state, P, fix: GnssFix, cfg: FilterConfig | None = None, variant=Variant.RIEKF):
    cfg = cfg or FilterConfig()
    return _apply(variant, state, P, gnss_model(variant, state, fix, cfg.R0.sigma_vG2, cfg.R0.sigma_pG2))


def baro_update(state, P, P_s, cfg: FilterConfig | None = None, variant=Variant.RIEKF):
    cfg = cfg or FilterConfig()
    height = pressure_to_height(P_s) - cfg.filter.baro_ref_altitude
    return _apply(variant, state, P, baro_model(variant, state, height, cfg.R0.sigma_Hbaro2))


def mag_update(state, P, m_b, cfg: FilterConfig | None = None, variant=Variant.RIEKF):
    cfg = cfg or FilterConfig()
    return _apply(variant, state, P, mag_model(variant, state, m_b, cfg.mag_variance()))


def airspeed_update(state, P, V_TAS, cfg: FilterConfig | None = None, variant=Variant.RIEKF):
    """Wind-triangle update; skipped (state returned unchanged) at low speed."""
    cfg = cfg or FilterConfig()
    if not V_TAS > cfg.filter.min_airspeed:
        log.info("airspeed %.2f m/s below gate, update skipped", V_TAS)
        return state, P
    return _apply(variant, state, P, airspeed_model(variant, state, V_TAS, cfg.R0.sigma_vTAS2))


def airflow_update(state, P, alpha, beta, cfg: FilterConfig | None = None, variant=Variant.RIEKF):
    cfg = cfg or FilterConfig()
    o = cfg.filter
    mm = airflow_model(variant, state, alpha, beta, (o.sigma_alpha, o.sigma_beta, o.sigma_roll))
    return _apply(variant, state, P, mm)


# Filter -------------------------------------------------------------------


@dataclass
class SensorStats:
    applied: int = 0
    gated: int = 0
    rejected: int = 0
    singular: int = 0


@dataclass
class Innovation:
    t: float
    kind: str
    z: np.ndarray
    d2: float
    dim: int


@dataclass
class StateHistory:
    """Append-only record of filter epochs."""

    t: list = field(default_factory=list)
    states: list = field(default_factory=list)
    P_diag: list = field(default_factory=list)
    innovations: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def append(self, t, state, P_diag):
        self.t.append(float(t))
        self.states.append(state)
        self.P_diag.append(np.array(P_diag))

    def times(self) -> np.ndarray:
        return np.asarray(self.t)

    def field(self, name) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.states])

    def innovations_of(self, kind):
        return [inn for inn in self.innovations if inn.kind == kind]


def make_predictor(cfg: FilterConfig, af: AirframeParams | None = None):
    """Airflow-angle source selected by ``cfg.filter.predictor``."""
    af = af or AirframeParams()
    name = cfg.filter.predictor
    if name == "none":
        return None
    if name == "channel":
        return ChannelPredictor()
    if name == "ls":
        path = cfg.filter.aero_coefficients
        if path:
            import json

            with open(path, encoding="utf-8") as fh:
                coef = AeroCoefficients.from_dict(json.load(fh))
        else:
            coef = AeroCoefficients()
        return LsPredictor(coef, af)
    path = cfg.filter.lstm_weights
    if not path:
        from .data import default_lstm_path

        path = default_lstm_path()
    return LstmPredictor(load_lstm_weights(path), af)


class NavFilter:
    """Multi-rate error-state filter over an event stream.

    An IMU event at time ``t`` carries the rates held over ``(t_prev, t]``;
    other events update the estimate at the current filter time.

    Parameters
    ----------
    cfg : FilterConfig
    state : FullState
        Initial estimate at ``t0``.
    t0 : float
    P : ndarray, optional
        Initial covariance; defaults to ``cfg.initial_covariance()``.
    variant : Variant or str, optional
        Overrides ``cfg.filter.variant``.
    predictor : callable, optional
        Airflow-angle source taking an :class:`AeroContext`; defaults to the
        one configured.
    freeze_time : float, optional
        Measurement events at or after this time are ignored (pure-inertial
        control).
    """

    def __init__(self, cfg: FilterConfig, state: FullState, t0=0.0, P=None, variant=None,
                 predictor="config", freeze_time=None):
        self.cfg = cfg
        self.variant = Variant.parse(variant if variant is not None else cfg.filter.variant)
        self._code = _backend.VARIANT_CODES[self.variant]
        self.state = state
        if P is None:
            # the configured prior is physical (ES coordinates)
            P = covariance_from_es(self.variant, state, cfg.initial_covariance())
        self.P = np.array(P, dtype=float)
        self.t = float(t0)
        self.q = cfg.process_noise().diag()
        self.predictor = make_predictor(cfg) if predictor == "config" else predictor
        self.freeze_time = freeze_time
        self.last_omega = None
        self.last_accel = None
        self.last_tas = math.nan
        self.stats = {k: SensorStats() for k in KINDS if k != "IMU"}
        self.innovations: list = []
        o = cfg.filter
        self._enabled = {
            "GNSS": o.use_gnss,
            "BARO": o.use_baro,
            "MAG": o.use_mag,
            "TAS": o.use_tas,
            "AERO": o.use_airflow and self.predictor is not None,
        }
        self._sigmas = (o.sigma_alpha, o.sigma_beta, o.sigma_roll)
        self._mag_var = cfg.mag_variance()
        self._gates = {}

    # -- propagation
    def propagate(self, imu: ImuSample):
        dt = imu.t - self.t
        if dt < -TIME_TOL:
            raise StaleMeasurementError(f"IMU sample at {imu.t} precedes filter time {self.t}")
        self.last_omega = imu.omega - self.state.b_g
        self.last_accel = imu.accel - self.state.b_a
        if dt <= TIME_TOL:
            return
        n = max(1, math.ceil(dt / MAX_DT - 1e-9))
        h = dt / n
        for _ in range(n):
            s = self.state
            w = imu.omega - s.b_g
            a = imu.accel - s.b_a
            self.P = _backend.predict_covariance(
                self._code, self.P, s.R_bn, s.v_n, s.p_n, w, a, h, self.q, GRAVITY
            )
            self.state = _flow(s, imu.omega, imu.accel, h)
        self.t = float(imu.t)

    # -- updates
    def _correct(self, kind, t, mm: MeasurementModel):
        st = self.stats[kind]
        dim = mm.z.shape[0]
        gate = self._gates.get(dim)
        if gate is None:
            gate = self._gates[dim] = self.cfg.gate_threshold(dim)
        status, dx, P_new, d2 = _backend.kalman_update(self.P, mm.H, mm.Rm, mm.z, gate, MAX_INNOVATION_COND)
        if status == 2:
            st.singular += 1
            log.warning("%s update at t=%.3f skipped: singular innovation covariance", kind, t)
            return
        self.innovations.append(Innovation(t, kind, mm.z, d2, mm.z.shape[0]))
        if status == 1:
            st.gated += 1
            return
        s = self.state
        R, v, p, R_ab = _backend.inject_error(self._code, s.R_bn, s.v_n, s.p_n, s.R_ab, dx)
        self.state = FullState._make(
            R, v, p, s.b_g + dx[BG], s.b_a + dx[BA], R_ab, s.v_wind + dx[WIND]
        )
        self.P = P_new
        st.applied += 1

    def _model(self, event: SensorEvent):
        kind = event.kind
        pl = event.payload
        var = self.variant
        R0 = self.cfg.R0
        if kind == "GNSS":
            return gnss_model(var, self.state, pl, R0.sigma_vG2, R0.sigma_pG2)
        if kind == "BARO":
            height = pressure_to_height(pl.P_s) - self.cfg.filter.baro_ref_altitude
            return baro_model(var, self.state, height, R0.sigma_Hbaro2)
        if kind == "MAG":
            return mag_model(var, self.state, pl.m_b, self._mag_var)
        if kind == "TAS":
            if not pl.V_TAS > self.cfg.filter.min_airspeed:
                return None
            return airspeed_model(var, self.state, pl.V_TAS, R0.sigma_vTAS2)
        # AERO
        if self.last_omega is None or not self.last_tas > self.cfg.filter.min_airspeed:
            return None
        ctx = AeroContext(
            delta_e=pl.delta_e,
            delta_r=pl.delta_r,
            alpha_channel=pl.alpha,
            beta_channel=pl.beta,
            omega=self.last_omega,
            accel=self.last_accel,
            V_TAS=self.last_tas,
            R_ab=self.state.R_ab,
        )
        pred = self.predictor(ctx)
        if pred is None:
            return None
        return airflow_model(var, self.state, pred[0], pred[1], self._sigmas)

    def update(self, event: SensorEvent):
        kind = event.kind
        if event.t < self.t - TIME_TOL:
            self.stats[kind].rejected += 1
            log.warning("stale %s event at t=%.6f (filter at %.6f) rejected", kind, event.t, self.t)
            return
        if self.freeze_time is not None and event.t >= self.freeze_time:
            return
        if kind == "TAS":
            self.last_tas = event.payload.V_TAS
        if not self._enabled[kind]:
            return
        try:
            mm = self._model(event)
        except ValueError as exc:
            self.stats[kind].rejected += 1
            log.warning("%s event at t=%.6f rejected: %s", kind, event.t, exc)
            return
        if mm is not None:
            self._correct(kind, event.t, mm)

    def process(self, event: SensorEvent):
        if event.kind == "IMU":
            self.propagate(event.payload)
        else:
            self.update(event)


def check_ordered(stream):
    prev = -math.inf
    for i, ev in enumerate(stream):
        if ev.t < prev:
            raise ValueError(f"event {i} at t={ev.t} is earlier than its predecessor ({prev})")
        prev = ev.t


def coarse_align(stream, window=1.0) -> tuple[FullState, float]:
    """Initial estimate from the first second of data.

    Attitude comes from TRIAD on the mean specific force (assumed to be
    dominated by gravity) and the first magnetometer vector; position and
    velocity from the first GNSS fix (zero when absent).
    """
    imu = [ev for ev in stream if ev.kind == "IMU"]
    if not imu:
        raise ValueError("stream has no IMU data for alignment")
    t0 = imu[0].t
    f = np.mean([ev.payload.accel for ev in imu if ev.t <= t0 + window], axis=0)
    mag = next((ev.payload.m_b for ev in stream if ev.kind == "MAG"), None)
    fix = next((ev.payload for ev in stream if ev.kind == "GNSS"), None)
    up_b = f / np.linalg.norm(f)  # specific force at rest points opposite gravity
    up_n = -GRAVITY / np.linalg.norm(GRAVITY)
    north_b = _unit(mag) if mag is not None else np.array([1.0, 0.0, 0.0])
    R = _triad(up_b, north_b, up_n, MAG_REFERENCE)
    state = FullState(
        R_bn=R,
        v_n=np.zeros(3) if fix is None else fix.v_n,
        p_n=np.zeros(3) if fix is None else fix.p_n,
    )
    return state, t0


def _triad(a_b, b_b, a_n, b_n):
    def frame(a, b):
        t1 = a / np.linalg.norm(a)
        t2 = np.cross(a, b)
        nrm = np.linalg.norm(t2)
        if nrm < 1e-9:
            raise ValueError("alignment vectors are parallel")
        t2 = t2 / nrm
        return np.column_stack([t1, t2, np.cross(t1, t2)])

    return frame(a_n, b_n) @ frame(a_b, b_b).T


def run_filter(stream, cfg: FilterConfig, variant=None, state0: FullState | None = None,
               t0: float | None = None, P0=None, predictor="config", freeze_time=None,
               record_every: int = 1) -> StateHistory:
    """Replay an event stream through a :class:`NavFilter`.

    One history entry is recorded per filter epoch (after all events sharing
    an IMU timestamp are processed), decimated by ``record_every``.

    Raises
    ------
    ValueError
        If the stream is not time-ordered or the variant is unknown.
    """
    stream = list(stream)
    check_ordered(stream)
    if variant is not None:
        variant = Variant.parse(variant)
    hist = StateHistory()
    if not stream:
        return hist
    if state0 is None:
        state0, t_align = coarse_align(stream)
        t0 = t_align if t0 is None else t0
    if t0 is None:
        t0 = stream[0].t
    f = NavFilter(cfg, state0, t0=t0, P=P0, variant=variant, predictor=predictor, freeze_time=freeze_time)
    epoch = 0
    for ev in stream:
        if ev.kind == "IMU" and ev.t > f.t + TIME_TOL:
            # the previous epoch is complete once time advances
            if epoch % record_every == 0:
                hist.append(f.t, f.state, np.diag(f.P))
            epoch += 1
        f.process(ev)
    hist.append(f.t, f.state, np.diag(f.P))
    hist.innovations = f.innovations
    hist.stats = f.stats
    return hist
