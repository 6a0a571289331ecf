"""Error statistics of an estimated trajectory against truth.

Truth is interpolated to the estimate timestamps: linearly for vectors and
along the relative rotation for attitude.  Angles are reported in degrees,
everything else in SI units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .airdata import angles_from_rab

CONVERGENCE_THRESHOLD_DEG = 2.0
CONVERGENCE_HOLD_S = 5.0

CHANNELS = (
    "attitude",
    "roll",
    "pitch",
    "yaw",
    "vel_n",
    "vel_e",
    "vel_d",
    "pos_n",
    "pos_e",
    "pos_d",
    "alpha",
    "beta",
    "wind_n",
    "wind_e",
    "wind_d",
)


@dataclass(frozen=True)
class ChannelMetrics:
    mae: float
    rmse: float


@dataclass
class MetricsReport:
    """Per-channel MAE/RMSE plus convergence and denial summaries.

    ``time_to_converge`` is ``inf`` when the attitude error never settles;
    the denial fields are ``None`` unless a window was requested.
    """

    channels: dict = field(default_factory=dict)
    time_to_converge: float = math.inf
    post_convergence_rmse: float = math.nan
    max_horizontal_error: float | None = None
    max_vertical_error: float | None = None
    samples: int = 0

    def to_dict(self) -> dict:
        def num(x):
            if x is None or not math.isfinite(x):
                return None
            return float(x)

        return {
            "channels": {
                name: {"mae": num(c.mae), "rmse": num(c.rmse)} for name, c in sorted(self.channels.items())
            },
            "max_horizontal_error": num(self.max_horizontal_error),
            "max_vertical_error": num(self.max_vertical_error),
            "post_convergence_rmse": num(self.post_convergence_rmse),
            "samples": self.samples,
            "time_to_converge": num(self.time_to_converge),
        }


def mae(errors) -> float:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("no samples")
    return float(np.mean(np.abs(e)))


def rmse(errors) -> float:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("no samples")
    return float(math.sqrt(np.mean(e * e)))


def time_to_converge(t, err, threshold=CONVERGENCE_THRESHOLD_DEG, hold=CONVERGENCE_HOLD_S) -> float:
    """Time from ``t[0]`` until ``err`` first stays below ``threshold`` for ``hold`` seconds.

    Returns ``inf`` if that never happens within the record.
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    if t.size == 0:
        raise ValueError("no samples")
    ok = err < threshold
    start = None
    for i in range(t.size):
        if not ok[i]:
            start = None
            continue
        if start is None:
            start = i
        if t[i] - t[start] >= hold - 1e-9:
            return float(t[start] - t[0])
    return math.inf


class TruthTrack:
    """Truth sequence with interpolation to arbitrary times."""

    def __init__(self, truth):
        truth = list(truth)
        if len(truth) < 2:
            raise ValueError("truth needs at least two records")
        self.t = np.array([r.t for r in truth])
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("truth timestamps must increase")
        self.v = np.array([r.state.v_n for r in truth])
        self.p = np.array([r.state.p_n for r in truth])
        self.w = np.array([r.state.v_wind for r in truth])
        self.alpha = np.array([r.alpha for r in truth])
        self.beta = np.array([r.beta for r in truth])
        self._slerp = Slerp(self.t, Rotation.from_matrix(np.array([r.state.R_bn for r in truth])))

    def at(self, times):
        """``(R, v, p, wind, alpha, beta)`` stacked over ``times``."""
        times = np.clip(np.asarray(times, dtype=float), self.t[0], self.t[-1])

        def lin(arr):
            return np.column_stack([np.interp(times, self.t, arr[:, j]) for j in range(arr.shape[1])])

        return (
            self._slerp(times),
            lin(self.v),
            lin(self.p),
            lin(self.w),
            np.interp(times, self.t, self.alpha),
            np.interp(times, self.t, self.beta),
        )


# Timestamps closer than this to the truth span still count as overlapping.
TIME_TOL = 1e-9


def _wrap_deg(x):
    return (np.asarray(x) + 180.0) % 360.0 - 180.0


def error_series(est, truth) -> tuple[np.ndarray, dict]:
    """Estimate times within the truth span and per-channel error arrays."""
    track = truth if isinstance(truth, TruthTrack) else TruthTrack(truth)
    t_all = np.asarray(est.times(), dtype=float)
    keep = (t_all >= track.t[0] - TIME_TOL) & (t_all <= track.t[-1] + TIME_TOL)
    if not np.any(keep):
        raise ValueError("estimate and truth time ranges do not overlap")
    states = [s for s, k in zip(est.states, keep) if k]
    t = t_all[keep]
    R_true, v, p, w, alpha, beta = track.at(t)
    R_est = Rotation.from_matrix(np.array([s.R_bn for s in states]))
    e_att = np.degrees((R_est * R_true.inv()).magnitude())
    eul_est = np.degrees(R_est.as_euler("ZYX"))
    eul_true = np.degrees(R_true.as_euler("ZYX"))
    d_eul = _wrap_deg(eul_est - eul_true)
    dv = np.array([s.v_n for s in states]) - v
    dp = np.array([s.p_n for s in states]) - p
    dw = np.array([s.v_wind for s in states]) - w
    ab = np.degrees(np.array([angles_from_rab(s.R_ab) for s in states]))
    errs = {
        "attitude": e_att,
        "roll": d_eul[:, 2],
        "pitch": d_eul[:, 1],
        "yaw": d_eul[:, 0],
        "alpha": _wrap_deg(ab[:, 0] - np.degrees(alpha)),
        "beta": _wrap_deg(ab[:, 1] - np.degrees(beta)),
    }
    for i, axis in enumerate("ned"):
        errs[f"vel_{axis}"] = dv[:, i]
        errs[f"pos_{axis}"] = dp[:, i]
        errs[f"wind_{axis}"] = dw[:, i]
    return t, errs


def compute_metrics(est, truth, window=None, threshold=CONVERGENCE_THRESHOLD_DEG,
                    hold=CONVERGENCE_HOLD_S) -> MetricsReport:
    """MAE/RMSE per channel, time to converge, and optional window maxima.

    Parameters
    ----------
    est : StateHistory
    truth : sequence of TruthRecord or TruthTrack
    window : (t0, t1), optional
        Interval (e.g. a GNSS denial) over which the maximum horizontal and
        vertical position errors are reported.

    Raises
    ------
    ValueError
        If the estimate and truth do not overlap in time.
    """
    t, errs = error_series(est, truth)
    report = MetricsReport(samples=int(t.size))
    report.channels = {name: ChannelMetrics(mae(errs[name]), rmse(errs[name])) for name in CHANNELS}
    ttc = time_to_converge(t, errs["attitude"], threshold, hold)
    report.time_to_converge = ttc
    if math.isfinite(ttc):
        report.post_convergence_rmse = rmse(errs["attitude"][t >= t[0] + ttc - TIME_TOL])
    if window is not None:
        t0, t1 = window
        m = (t >= t0 - TIME_TOL) & (t <= t1 + TIME_TOL)
        if not np.any(m):
            raise ValueError(f"no estimates inside window {window}")
        horiz = np.hypot(errs["pos_n"][m], errs["pos_e"][m])
        report.max_horizontal_error = float(horiz.max())
        report.max_vertical_error = float(np.abs(errs["pos_d"][m]).max())
    return report
