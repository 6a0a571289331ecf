"""Airflow angles, wind triangle, aerodynamic model and AOA/SA predictors.

The airflow frame has its x axis along the air-relative velocity.  ``R_ab``
maps airflow to body coordinates, so the body-frame air velocity is
``R_ab @ [V, 0, 0]``.  Body axes are forward-right-down, hence a positive
angle of attack has a positive body z component.

The aerodynamic model is linear in its regressors::

    C_L = C_L0 + C_La alpha + C_Lq q + C_Lde delta_e
    C_Y = C_Y0 + C_Yb beta + C_Ydr delta_r + C_Yp p + C_Yr r

with body rates used unnormalized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRegressorError, InvalidModelError

MIN_SPEED = 1e-6
LOW_SPEED_GATE = 2.0
MAX_REGRESSOR_COND = 1e10

LIFT_TERMS = ("C_L0", "C_La", "C_Lq", "C_Lde")
SIDE_TERMS = ("C_Y0", "C_Yb", "C_Ydr", "C_Yp", "C_Yr")
FEATURES = ("C_L", "C_Y", "p", "q", "r", "delta_e", "delta_r", "V_TAS")

LSTM_FORMAT = "uavnav-lstm"
LSTM_VERSION = 1


@dataclass(frozen=True)
class AirflowAngles:
    V: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class AirframeParams:
    """Mass (kg), wing area (m^2), air density (kg/m^3), span and chord (m)."""

    m: float = 10.0
    S: float = 0.5
    rho: float = 1.225
    b_span: float = 2.5
    c_bar: float = 0.2

    def __post_init__(self):
        for name in ("m", "S", "rho", "b_span", "c_bar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class AeroCoefficients:
    C_L0: float = 0.2
    C_La: float = 4.5
    C_Lq: float = 0.5
    C_Lde: float = 0.4
    C_Y0: float = 0.0
    C_Yb: float = -0.6
    C_Ydr: float = 0.15
    C_Yp: float = 0.02
    C_Yr: float = 0.1

    def lift(self, alpha, q, delta_e):
        return self.C_L0 + self.C_La * alpha + self.C_Lq * q + self.C_Lde * delta_e

    def side(self, beta, delta_r, p, r):
        return self.C_Y0 + self.C_Yb * beta + self.C_Ydr * delta_r + self.C_Yp * p + self.C_Yr * r

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in LIFT_TERMS + SIDE_TERMS}

    @classmethod
    def from_dict(cls, data) -> AeroCoefficients:
        unknown = set(data) - set(LIFT_TERMS + SIDE_TERMS)
        if unknown:
            raise ValueError(f"unknown coefficient(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def aoa_sa_from_body(v_body) -> AirflowAngles:
    """Airspeed, angle of attack and sideslip of a body-frame air velocity."""
    u, v, w = (float(x) for x in v_body)
    V = math.sqrt(u * u + v * v + w * w)
    if not V > MIN_SPEED:
        raise ValueError("air velocity too small to define airflow angles")
    return AirflowAngles(V, math.atan2(w, u), math.asin(max(-1.0, min(1.0, v / V))))


def rab_from_angles(alpha: float, beta: float) -> np.ndarray:
    """Airflow-to-body rotation ``R_y(-alpha) R_z(beta)``."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    return np.array(
        [
            [ca * cb, -ca * sb, -sa],
            [sb, cb, 0.0],
            [sa * cb, -sa * sb, ca],
        ]
    )


def angles_from_rab(R_ab) -> tuple[float, float]:
    """``(alpha, beta)`` of the airflow direction ``R_ab e1``."""
    a = aoa_sa_from_body(np.asarray(R_ab)[:, 0])
    return a.alpha, a.beta


def wind_triangle(v_ground_n, R_bn, R_ab, v_tas_a) -> np.ndarray:
    """Wind ``v_G - R_bn R_ab v_TAS`` in the navigation frame."""
    return np.asarray(v_ground_n, dtype=float) - R_bn @ (R_ab @ np.asarray(v_tas_a, dtype=float))


def equivalent_coefficients(a_body, omega, V_TAS, af: AirframeParams, R_ab):
    """Equivalent lift and side-force coefficients from specific force.

    Returns
    -------
    (C_L, C_Y, qbar) : tuple of float
        ``qbar = rho V^2 / 2``; the coefficients use the specific force
        resolved in the airflow frame.
    """
    del omega  # rates enter the regression, not the coefficient itself
    if not V_TAS > LOW_SPEED_GATE:
        raise ValueError(f"airspeed {V_TAS!r} below {LOW_SPEED_GATE} m/s")
    a_air = np.asarray(R_ab).T @ np.asarray(a_body, dtype=float)
    qbar = 0.5 * af.rho * V_TAS * V_TAS
    scale = af.m / (qbar * af.S)
    return float(-a_air[2] * scale), float(a_air[1] * scale), float(qbar)


@dataclass(frozen=True)
class LsFit:
    coefficients: AeroCoefficients
    lift_rms: float
    side_rms: float
    lift_stderr: np.ndarray
    side_stderr: np.ndarray


def _ols(X, y):
    n, k = X.shape
    if n < 2 * k:
        raise DegenerateRegressorError(f"need at least {2 * k} samples, got {n}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("regression data must be finite")
    cond = np.linalg.cond(X)
    if not cond <= MAX_REGRESSOR_COND:
        raise DegenerateRegressorError(f"regressor condition number {cond:.3g}")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = n - k
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return beta, math.sqrt(float(np.mean(resid**2))), np.sqrt(np.diag(cov))


def ls_fit(lift, side) -> LsFit:
    """Ordinary least squares for the lift and side-force models.

    Parameters
    ----------
    lift : (N, 4) array_like
        Rows ``(C_L, alpha, q, delta_e)``.
    side : (M, 5) array_like
        Rows ``(C_Y, beta, delta_r, p, r)``.
    """
    lift = np.atleast_2d(np.asarray(lift, dtype=float))
    side = np.atleast_2d(np.asarray(side, dtype=float))
    if lift.shape[1] != 4 or side.shape[1] != 5:
        raise ValueError("lift rows need 4 columns and side rows 5")
    XL = np.column_stack([np.ones(len(lift)), lift[:, 1:]])
    XY = np.column_stack([np.ones(len(side)), side[:, 1:]])
    bl, rl, sl = _ols(XL, lift[:, 0])
    by, ry, sy = _ols(XY, side[:, 0])
    coef = AeroCoefficients(*bl, *by)
    return LsFit(coef, rl, ry, sl, sy)


def ls_predict(coef: AeroCoefficients, C_L, C_Y, q, delta_e, delta_r, p, r):
    """Invert the linear force model for ``(alpha, beta)``."""
    if abs(coef.C_La) <= 1e-6 or abs(coef.C_Yb) <= 1e-6:
        raise InvalidModelError("lift or side-force slope too small to invert")
    alpha = (C_L - coef.C_L0 - coef.C_Lq * q - coef.C_Lde * delta_e) / coef.C_La
    beta = (C_Y - coef.C_Y0 - coef.C_Ydr * delta_r - coef.C_Yp * p - coef.C_Yr * r) / coef.C_Yb
    return alpha, beta


# LSTM inference -----------------------------------------------------------

_GATES = ("i", "f", "o", "g")


@dataclass(frozen=True)
class LstmWeights:
    """Single-layer LSTM with a linear readout and feature scalers.

    Gate matrices ``W[gate]`` are ``(hidden, input)``, ``U[gate]`` are
    ``(hidden, hidden)`` and ``b[gate]`` are ``(hidden,)`` for gates
    ``i, f, o, g``.
    """

    W: dict
    U: dict
    b: dict
    readout_W: np.ndarray = field(default_factory=lambda: np.zeros((2, 0)))
    readout_b: np.ndarray = field(default_factory=lambda: np.zeros(2))
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    seq_len: int = 1

    def __post_init__(self):
        hidden, inp = np.shape(self.W["i"])
        for gate in _GATES:
            if np.shape(self.W[gate]) != (hidden, inp):
                raise ValueError(f"W_{gate} must be {(hidden, inp)}")
            if np.shape(self.U[gate]) != (hidden, hidden):
                raise ValueError(f"U_{gate} must be {(hidden, hidden)}")
            if np.shape(self.b[gate]) != (hidden,):
                raise ValueError(f"b_{gate} must be ({hidden},)")
        for d in (self.W, self.U, self.b):
            for gate in _GATES:
                d[gate] = np.asarray(d[gate], dtype=float)
                if not np.all(np.isfinite(d[gate])):
                    raise ValueError("LSTM weights must be finite")
        object.__setattr__(self, "readout_W", np.asarray(self.readout_W, dtype=float))
        object.__setattr__(self, "readout_b", np.asarray(self.readout_b, dtype=float))
        if self.readout_W.shape[1:] != (hidden,) or self.readout_b.shape != self.readout_W.shape[:1]:
            raise ValueError("readout shapes do not match the hidden size")
        if self.seq_len < 1:
            raise ValueError("seq_len must be positive")
        # Stacked (4H, I) and (4H, H) matrices for a single matmul per step.
        object.__setattr__(self, "_Ws", np.vstack([self.W[g] for g in _GATES]))
        object.__setattr__(self, "_Us", np.vstack([self.U[g] for g in _GATES]))
        object.__setattr__(self, "_bs", np.concatenate([self.b[g] for g in _GATES]))

    @property
    def hidden_size(self) -> int:
        return self.W["i"].shape[0]

    @property
    def input_size(self) -> int:
        return self.W["i"].shape[1]

    @classmethod
    def zeros(cls, input_size, hidden_size, outputs=2, seq_len=1) -> LstmWeights:
        z = {g: np.zeros((hidden_size, input_size)) for g in _GATES}
        zu = {g: np.zeros((hidden_size, hidden_size)) for g in _GATES}
        zb = {g: np.zeros(hidden_size) for g in _GATES}
        return cls(z, zu, zb, np.zeros((outputs, hidden_size)), np.zeros(outputs), seq_len=seq_len)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_cell(w: LstmWeights, x, h, c):
    """One LSTM step; returns ``(h', c')``."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    c = np.asarray(c, dtype=float)
    H = w.hidden_size
    if x.shape != (w.input_size,) or h.shape != (H,) or c.shape != (H,):
        raise ValueError("LSTM input, hidden or cell dimension mismatch")
    z = w._Ws @ x + w._Us @ h + w._bs
    i = _sigmoid(z[:H])
    f = _sigmoid(z[H : 2 * H])
    o = _sigmoid(z[2 * H : 3 * H])
    g = np.tanh(z[3 * H :])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def sequence_predict(w: LstmWeights, window):
    """Run the cell over a feature window and read out ``(alpha, beta)``.

    ``window`` is ``(seq_len, n_features)`` in raw units; it is normalized
    with the stored scalers before inference.
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[0] != w.seq_len:
        raise ValueError(f"window must have {w.seq_len} rows")
    if w.feature_mean is None or w.feature_scale is None:
        raise ValueError("weights carry no feature scalers")
    x = (window - w.feature_mean) / w.feature_scale
    h = np.zeros(w.hidden_size)
    c = np.zeros(w.hidden_size)
    for row in x:
        h, c = lstm_cell(w, row, h, c)
    out = w.readout_W @ h + w.readout_b
    return float(out[0]), float(out[1])


def save_lstm_weights(w: LstmWeights, path):
    doc = {
        "format": LSTM_FORMAT,
        "version": LSTM_VERSION,
        "input_size": w.input_size,
        "hidden_size": w.hidden_size,
        "seq_len": w.seq_len,
        "features": list(FEATURES),
        "feature_mean": None if w.feature_mean is None else np.asarray(w.feature_mean).tolist(),
        "feature_scale": None if w.feature_scale is None else np.asarray(w.feature_scale).tolist(),
        "readout_W": w.readout_W.tolist(),
        "readout_b": w.readout_b.tolist(),
    }
    for gate in _GATES:
        doc[f"W_{gate}"] = w.W[gate].tolist()
        doc[f"U_{gate}"] = w.U[gate].tolist()
        doc[f"b_{gate}"] = w.b[gate].tolist()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_lstm_weights(path) -> LstmWeights:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != LSTM_FORMAT or doc.get("version") != LSTM_VERSION:
        raise ValueError(f"{path}: not a {LSTM_FORMAT} v{LSTM_VERSION} file")
    try:
        w = LstmWeights(
            W={g: np.array(doc[f"W_{g}"], dtype=float) for g in _GATES},
            U={g: np.array(doc[f"U_{g}"], dtype=float) for g in _GATES},
            b={g: np.array(doc[f"b_{g}"], dtype=float) for g in _GATES},
            readout_W=np.array(doc["readout_W"], dtype=float),
            readout_b=np.array(doc["readout_b"], dtype=float),
            feature_mean=None if doc["feature_mean"] is None else np.array(doc["feature_mean"], dtype=float),
            feature_scale=None if doc["feature_scale"] is None else np.array(doc["feature_scale"], dtype=float),
            seq_len=int(doc["seq_len"]),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc}") from None
    if (w.input_size, w.hidden_size) != (doc["input_size"], doc["hidden_size"]):
        raise ValueError(f"{path}: header sizes do not match the matrices")
    return w


# Predictors used by the filter --------------------------------------------


@dataclass
class AeroContext:
    """Inputs available to a predictor when an aero event arrives."""

    delta_e: float
    delta_r: float
    alpha_channel: float
    beta_channel: float
    omega: np.ndarray  # bias-corrected body rate
    accel: np.ndarray  # bias-corrected specific force
    V_TAS: float
    R_ab: np.ndarray  # current airflow-rotation estimate


class ChannelPredictor:
    """Pass through the angle estimates carried on the aero channel."""

    def __call__(self, ctx: AeroContext):
        return ctx.alpha_channel, ctx.beta_channel

    def reset(self):
        pass


class LsPredictor:
    """Invert the identified force model at every aero sample."""

    def __init__(self, coef: AeroCoefficients, af: AirframeParams):
        self.coef = coef
        self.af = af

    def features(self, ctx: AeroContext):
        C_L, C_Y, _ = equivalent_coefficients(ctx.accel, ctx.omega, ctx.V_TAS, self.af, ctx.R_ab)
        return C_L, C_Y

    def __call__(self, ctx: AeroContext):
        if not ctx.V_TAS > LOW_SPEED_GATE:
            return None
        C_L, C_Y = self.features(ctx)
        p, q, r = ctx.omega
        return ls_predict(self.coef, C_L, C_Y, q, ctx.delta_e, ctx.delta_r, p, r)

    def reset(self):
        pass


class LstmPredictor:
    """Windowed LSTM over the feature sequence ``FEATURES``."""

    def __init__(self, weights: LstmWeights, af: AirframeParams):
        self.weights = weights
        self.af = af
        self.buffer: list = []

    def __call__(self, ctx: AeroContext):
        if not ctx.V_TAS > LOW_SPEED_GATE:
            return None
        C_L, C_Y, _ = equivalent_coefficients(ctx.accel, ctx.omega, ctx.V_TAS, self.af, ctx.R_ab)
        p, q, r = ctx.omega
        self.buffer.append((C_L, C_Y, p, q, r, ctx.delta_e, ctx.delta_r, ctx.V_TAS))
        n = self.weights.seq_len
        if len(self.buffer) > n:
            del self.buffer[0]
        if len(self.buffer) < n:
            return None
        return sequence_predict(self.weights, self.buffer)

    def reset(self):
        self.buffer.clear()


# Batch processing of recorded logs ----------------------------------------


@dataclass
class AeroSample:
    """Aero event with the most recent IMU and airspeed readings."""

    t: float
    delta_e: float
    delta_r: float
    alpha_channel: float
    beta_channel: float
    alpha_true: float
    beta_true: float
    omega: np.ndarray
    accel: np.ndarray
    V_TAS: float


def aero_samples(events) -> list:
    """Aero events paired with the IMU sample that follows them and the latest airspeed.

    An IMU sample stamped ``t`` holds the rates over the interval ending at
    ``t``, so the interval starting at an aero event arrives with the next
    IMU sample.  Aero events at airspeeds below ``LOW_SPEED_GATE``, before
    any airspeed reading, or after the last IMU sample are skipped.
    """
    out = []
    pending = []
    tas = math.nan
    for ev in events:
        kind = ev.kind
        if kind == "IMU":
            imu = ev.payload
            for t, a, v in pending:
                out.append(AeroSample(t, a.delta_e, a.delta_r, a.alpha, a.beta, a.alpha_true,
                                      a.beta_true, imu.omega, imu.accel, v))
            pending.clear()
        elif kind == "TAS":
            tas = ev.payload.V_TAS
        elif kind == "AERO" and tas > LOW_SPEED_GATE:
            pending.append((ev.t, ev.payload, tas))
    return out


def fit_from_samples(samples, af: AirframeParams) -> LsFit:
    """Least-squares identification using the reference angles of each sample.

    Raises
    ------
    ValueError
        If any sample lacks reference angles.
    """
    lift, side = [], []
    for s in samples:
        if not (math.isfinite(s.alpha_true) and math.isfinite(s.beta_true)):
            raise ValueError(f"aero sample at t={s.t} has no reference angles")
        R_ab = rab_from_angles(s.alpha_true, s.beta_true)
        C_L, C_Y, _ = equivalent_coefficients(s.accel, s.omega, s.V_TAS, af, R_ab)
        p, q, r = s.omega
        lift.append((C_L, s.alpha_true, q, s.delta_e))
        side.append((C_Y, s.beta_true, s.delta_r, p, r))
    if not lift:
        raise DegenerateRegressorError("no usable aero samples")
    return ls_fit(lift, side)


def predict_samples(samples, predictor, af: AirframeParams) -> list:
    """``(t, alpha, beta)`` per sample; NaN while the predictor has no output.

    The airflow rotation needed for the force coefficients is taken from the
    channel angles carried on each sample.
    """
    rows = []
    for s in samples:
        ctx = AeroContext(s.delta_e, s.delta_r, s.alpha_channel, s.beta_channel, s.omega, s.accel,
                          s.V_TAS, rab_from_angles(s.alpha_channel, s.beta_channel))
        out = predictor(ctx)
        rows.append((s.t, *(out if out is not None else (math.nan, math.nan))))
    return rows
