"""CSV sensor logs, truth logs and estimate tables.

Sensor log: header ``t,type,f1,...,f7``; one event per row; unused fields
empty.  Field layout per type:

======  ==========================================================
IMU     omega (3, rad/s), specific force (3, m/s^2)
GNSS    position (3, m), velocity (3, m/s)
BARO    static pressure (bar)
MAG     unit field vector in body axes (3)
TAS     true airspeed (m/s)
AERO    delta_e, delta_r, alpha, beta (rad), true alpha, true beta
======  ==========================================================

Floats are written with ``repr`` so that a write/read cycle is exact and
identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .airdata import angles_from_rab, rab_from_angles
from .errors import LogFormatError
from .propagation import ImuSample
from .state import FullState
from .updates import AeroReading, AirspeedReading, BaroReading, GnssFix, MagReading, SensorEvent

SENSOR_HEADER = ["t", "type"] + [f"f{i}" for i in range(1, 8)]
DCM_COLUMNS = [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)]
TRUTH_HEADER = (
    ["t"]
    + DCM_COLUMNS
    + ["vx", "vy", "vz", "px", "py", "pz", "alpha", "beta", "wx", "wy", "wz"]
    + ["wind_n", "wind_e", "wind_d", "ax", "ay", "az", "V", "delta_e", "delta_r"]
    + ["bgx", "bgy", "bgz", "bax", "bay", "baz"]
)
STATE_HEADER = (
    ["t"]
    + DCM_COLUMNS
    + ["vx", "vy", "vz", "px", "py", "pz", "bgx", "bgy", "bgz", "bax", "bay", "baz"]
    + ["alpha", "beta", "wind_n", "wind_e", "wind_d"]
    + [f"P{i:02d}" for i in range(21)]
)


def _fmt(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _fields(ev: SensorEvent) -> list:
    pl = ev.payload
    kind = ev.kind
    if kind == "IMU":
        vals = [*pl.omega, *pl.accel]
    elif kind == "GNSS":
        vals = [*pl.p_n, *pl.v_n]
    elif kind == "BARO":
        vals = [pl.P_s]
    elif kind == "MAG":
        vals = [*pl.m_b]
    elif kind == "TAS":
        vals = [pl.V_TAS]
    else:
        vals = [pl.delta_e, pl.delta_r, pl.alpha, pl.beta, pl.alpha_true, pl.beta_true]
    return [_fmt(v) for v in vals] + [""] * (7 - len(vals))


def write_sensor_log(events, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SENSOR_HEADER)
        for ev in events:
            w.writerow([_fmt(ev.t), ev.kind, *_fields(ev)])


_NFIELDS = {"IMU": 6, "GNSS": 6, "BARO": 1, "MAG": 3, "TAS": 1, "AERO": 4}


def _parse_row(row, lineno) -> SensorEvent:
    if len(row) != len(SENSOR_HEADER):
        raise LogFormatError(f"line {lineno}: expected {len(SENSOR_HEADER)} columns, got {len(row)}")
    kind = row[1]
    if kind not in _NFIELDS:
        raise LogFormatError(f"line {lineno}: unknown event type {kind!r}")
    try:
        t = float(row[0])
        vals = [float(x) if x != "" else math.nan for x in row[2:]]
    except ValueError as exc:
        raise LogFormatError(f"line {lineno}: {exc}") from None
    need = _NFIELDS[kind]
    if not math.isfinite(t) or any(not math.isfinite(v) for v in vals[:need]):
        raise LogFormatError(f"line {lineno}: {kind} needs {need} finite fields")
    v = np.array(vals)
    if kind == "IMU":
        payload = ImuSample(t, v[0:3], v[3:6])
    elif kind == "GNSS":
        payload = GnssFix(p_n=v[0:3], v_n=v[3:6])
    elif kind == "BARO":
        payload = BaroReading(vals[0])
    elif kind == "MAG":
        payload = MagReading(v[0:3])
    elif kind == "TAS":
        payload = AirspeedReading(vals[0])
    else:
        payload = AeroReading(*vals[:6])
    return SensorEvent(t, payload)


def read_sensor_log(path) -> list:
    """Events of a sensor log in file order.

    Raises
    ------
    LogFormatError
        On a missing or wrong header, unknown types or malformed values.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SENSOR_HEADER:
            raise LogFormatError(f"{path}: header must be {','.join(SENSOR_HEADER)}")
        return [_parse_row(row, n) for n, row in enumerate(reader, start=2) if row]


def write_truth_log(truth, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for r in truth:
            s = r.state
            vals = [r.t, *s.R_bn.ravel(), *s.v_n, *s.p_n, r.alpha, r.beta, *r.omega]
            vals += [*s.v_wind, *r.accel, r.V, r.delta_e, r.delta_r, *s.b_g, *s.b_a]
            w.writerow([_fmt(x) for x in vals])


def _read_table(path, header):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise LogFormatError(f"{path}: unexpected header")
        try:
            rows = [[float(x) for x in row] for row in reader if row]
        except ValueError as exc:
            raise LogFormatError(f"{path}: {exc}") from None
    if any(len(r) != len(header) for r in rows):
        raise LogFormatError(f"{path}: ragged rows")
    return np.array(rows).reshape(-1, len(header))


def read_truth_log(path) -> list:
    from .simulator import TruthRecord

    a = _read_table(path, TRUTH_HEADER)
    col = {name: i for i, name in enumerate(TRUTH_HEADER)}

    def vec(first):
        i = col[first]
        return lambda row: row[i : i + 3]

    bg, ba, wind = vec("bgx"), vec("bax"), vec("wind_n")
    omega, accel = vec("wx"), vec("ax")
    out = []
    for row in a:
        alpha, beta = row[col["alpha"]], row[col["beta"]]
        state = FullState(
            R_bn=row[1:10].reshape(3, 3),
            v_n=row[col["vx"] : col["vx"] + 3],
            p_n=row[col["px"] : col["px"] + 3],
            b_g=bg(row),
            b_a=ba(row),
            R_ab=rab_from_angles(alpha, beta),
            v_wind=wind(row),
        )
        out.append(
            TruthRecord(row[0], state, alpha, beta, omega(row), accel(row), row[col["V"]],
                        row[col["delta_e"]], row[col["delta_r"]])
        )
    return out


def write_state_log(history, path):
    """Estimated states of a :class:`StateHistory` with the covariance diagonal."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATE_HEADER)
        for t, s, pd in zip(history.t, history.states, history.P_diag):
            alpha, beta = angles_from_rab(s.R_ab)
            vals = [t, *s.R_bn.ravel(), *s.v_n, *s.p_n, *s.b_g, *s.b_a, alpha, beta, *s.v_wind, *pd]
            w.writerow([_fmt(x) for x in vals])
