"""Deterministic flight trajectories and multi-rate sensor synthesis.

The truth trajectory follows a segment table through first-order guidance
lags on airspeed, turn rate and climb rate.  At each IMU step the body rate
and specific force that reach the next desired attitude and velocity are
solved for, and the truth state is then produced by :func:`strapdown_step`
with exactly those inputs, so re-integrating the emitted true rates
reproduces the truth.

Frames: navigation NED, body forward-right-down.  The airflow frame is
``R_an = Rz(psi) Ry(gamma) Rx(mu)`` (heading, air-relative flight-path angle,
bank about the air velocity) and the attitude is ``R_bn = R_an R_ab^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .airdata import AeroCoefficients, AirframeParams, equivalent_coefficients, rab_from_angles
from .constants import DEG, GRAVITY, GRAVITY_MAGNITUDE, HEIGHT_ROW, MAG_REFERENCE
from .lie import so3_log
from .propagation import ImuSample, strapdown_step
from .state import FullState
from .updates import (
    AeroReading,
    AirspeedReading,
    BaroReading,
    GnssFix,
    MagReading,
    SensorEvent,
    height_to_pressure,
)

SEGMENT_KINDS = ("taxi", "climb", "turn", "cruise", "descend")

# Fixed sub-stream indices: adding a channel never perturbs the others.
CHANNELS = {"wind": 0, "imu": 1, "gnss": 2, "baro": 3, "mag": 4, "pitot": 5, "aero": 6, "bias": 7}

# Below this speed the flight attitude model is not evaluated.
MIN_FLIGHT_SPEED = 5.0

# Emission order for events sharing a timestamp; IMU first so that the
# filter reaches time t before any measurement stamped t.
KIND_ORDER = {"IMU": 0, "GNSS": 1, "BARO": 2, "MAG": 3, "TAS": 4, "AERO": 5}


@dataclass(frozen=True)
class Segment:
    kind: str
    duration: float
    speed: float = 20.0
    turn_rate: float = 0.0
    climb_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")
        if self.kind == "taxi":
            if not self.speed >= 0:
                raise ValueError("taxi speed must be non-negative")
        elif not self.speed > 0:
            raise ValueError("segment speed must be positive")


@dataclass(frozen=True)
class WindSpec:
    mean: tuple = (0.0, 0.0, 0.0)
    sigma: float = 0.0  # random walk, m/s/sqrt(s)


@dataclass(frozen=True)
class Rates:
    imu: float = 100.0
    gnss: float = 5.0
    baro: float = 100.0
    mag: float = 100.0
    pitot: float = 100.0
    aero: float = 100.0

    def decimation(self, name) -> int:
        """IMU steps between samples of channel ``name`` (0 disables it)."""
        rate = getattr(self, name)
        if rate == 0:
            return 0
        ratio = self.imu / rate
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-9:
            raise ValueError(f"{name} rate {rate} Hz must divide the IMU rate {self.imu} Hz")
        return n


@dataclass(frozen=True)
class SensorSpec:
    """Sensor error characteristics (defaults per the reference hardware).

    Densities: ``gyro_arw`` rad/sqrt(s), ``accel_vrw`` m/s/sqrt(s).  Bias
    stabilities set both the turn-on spread and the random walk
    ``stability / sqrt(3600)`` per sqrt(s).
    """

    gyro_bias_stability: float = 6.25 * DEG / 3600.0
    gyro_arw: float = 0.3 * DEG / 60.0
    accel_bias_stability: float = 0.1
    accel_vrw: float = 0.029 / 60.0
    gnss_pos: float = 0.1
    gnss_vel: float = 0.1
    mag: float = 0.45 / 500.0  # 0.45 mgauss on a 500 mgauss unit-normalized field
    baro: float = 0.025e-3  # bar
    pitot: float = 1.0
    rudder: float = 0.1 * DEG
    aero_alpha: float = 1.0 * DEG  # channel estimate error
    aero_beta: float = 2.7 * DEG

    @classmethod
    def noiseless(cls) -> SensorSpec:
        return cls(**{name: 0.0 for name in cls.__dataclass_fields__})

    def scaled(self, **changes) -> SensorSpec:
        return replace(self, **changes)


@dataclass(frozen=True)
class Scenario:
    seed: int = 0
    segments: tuple = (Segment("cruise", 60.0),)
    wind: WindSpec = field(default_factory=WindSpec)
    rates: Rates = field(default_factory=Rates)
    denial: tuple = ()
    sensors: SensorSpec = field(default_factory=SensorSpec)
    heading: float = 0.0
    origin_altitude: float = 100.0  # m above the pressure datum
    start_height: float = 100.0  # m above the navigation origin
    alpha_excitation: float = 1.0 * DEG
    beta_excitation: float = 0.5 * DEG
    excitation_period: float = 7.0
    tau_speed: float = 2.0
    tau_turn: float = 1.0
    tau_climb: float = 2.0
    aero: AeroCoefficients = field(default_factory=AeroCoefficients)
    airframe: AirframeParams = field(default_factory=AirframeParams)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "denial", tuple(tuple(w) for w in self.denial))
        if not self.segments:
            raise ValueError("scenario needs at least one segment")
        for name in ("gnss", "baro", "mag", "pitot", "aero"):
            self.rates.decimation(name)
        if not self.rates.imu > 0:
            raise ValueError("IMU rate must be positive")
        if any(seg.kind == "taxi" for seg in self.segments) and (
            any(self.wind.mean) or self.wind.sigma
        ):
            # ground motion is wind-independent, which the wind triangle cannot express
            raise ValueError("scenarios with taxi segments require calm air")
        for t0, t1 in self.denial:
            if not 0.0 <= t0 <= t1 <= self.duration:
                raise ValueError(f"denial window {(t0, t1)} outside [0, {self.duration}]")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def dt(self) -> float:
        return 1.0 / self.rates.imu

    @property
    def n_steps(self) -> int:
        return int(round(self.duration * self.rates.imu))


@dataclass(frozen=True)
class TruthRecord:
    """Truth at ``t``; ``omega``/``accel`` are held over ``[t, t + dt)``."""

    t: float
    state: FullState
    alpha: float
    beta: float
    omega: np.ndarray
    accel: np.ndarray
    V: float
    delta_e: float = 0.0
    delta_r: float = 0.0


def _rng(seed, channel) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(CHANNELS[channel],)))


def wind_step(w, sigma, dt, rng) -> np.ndarray:
    """First-order random walk ``w + N(0, sigma^2 dt)`` per axis."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    w = np.asarray(w, dtype=float)
    if sigma == 0.0:
        return w.copy()
    return w + rng.normal(0.0, sigma * math.sqrt(dt), size=3)


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


class _Guidance:
    """Lagged air-relative kinematics driven by the segment table."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        first = sc.segments[0]
        self.V = first.speed
        self.psi = sc.heading
        self.psi_dot = first.turn_rate
        self.climb = self._climb_cmd(first)
        # 0 on the ground, 1 airborne; lags so takeoff has no attitude step
        self.airborne = 0.0 if first.kind == "taxi" else 1.0
        self.bounds = np.cumsum([s.duration for s in sc.segments])

    @staticmethod
    def _climb_cmd(seg):
        if seg.kind == "descend":
            return -abs(seg.climb_rate)
        if seg.kind in ("climb",):
            return abs(seg.climb_rate)
        if seg.kind == "taxi":
            return 0.0
        return seg.climb_rate

    def segment_at(self, t) -> Segment:
        i = int(np.searchsorted(self.bounds, t, side="right"))
        return self.sc.segments[min(i, len(self.sc.segments) - 1)]

    def advance(self, t, dt):
        seg = self.segment_at(t)
        sc = self.sc
        # exact discretization of the first-order lags
        kv = 1.0 - math.exp(-dt / sc.tau_speed)
        kt = 1.0 - math.exp(-dt / sc.tau_turn)
        kc = 1.0 - math.exp(-dt / sc.tau_climb)
        self.psi += self.psi_dot * dt
        self.V += kv * (seg.speed - self.V)
        self.psi_dot += kt * (seg.turn_rate - self.psi_dot)
        self.climb += kc * (self._climb_cmd(seg) - self.climb)
        self.airborne += kc * ((seg.kind != "taxi") - self.airborne)

    def attitude(self, t):
        """``(R_an, air velocity (nav), alpha, beta, V)`` at time ``t``."""
        sc = self.sc
        seg = self.segment_at(t)
        V = self.V
        gamma = math.asin(max(-0.5, min(0.5, self.climb / V))) if V > 1.0 else 0.0
        if seg.kind == "taxi" and self.airborne < 1e-12 or V < MIN_FLIGHT_SPEED:
            mu = 0.0
            alpha = beta = 0.0
        else:
            mu = math.atan(V * self.psi_dot * math.cos(gamma) / GRAVITY_MAGNITUDE)
            af = sc.airframe
            qbar = 0.5 * af.rho * V * V
            load = math.cos(gamma) / math.cos(mu)
            CL = load * af.m * GRAVITY_MAGNITUDE / (qbar * af.S)
            w = 2.0 * math.pi / sc.excitation_period
            alpha = (CL - sc.aero.C_L0) / sc.aero.C_La + sc.alpha_excitation * math.sin(w * t)
            beta = sc.beta_excitation * math.sin(0.7 * w * t + 0.3)
            mu *= self.airborne
            alpha *= self.airborne
            beta *= self.airborne
        R_an = _rz(self.psi) @ _ry(gamma) @ _rx(mu)
        return R_an, R_an[:, 0] * V, alpha, beta, V


def generate_trajectory(sc: Scenario) -> list:
    """Truth records on the IMU grid ``t_k = k / imu_rate``, ``k = 0..N``."""
    dt = sc.dt
    N = sc.n_steps
    rng_w = _rng(sc.seed, "wind")
    rng_b = _rng(sc.seed, "bias")
    spec = sc.sensors
    g = _Guidance(sc)

    b_g = rng_b.normal(0.0, spec.gyro_bias_stability, 3) if spec.gyro_bias_stability else np.zeros(3)
    b_a = rng_b.normal(0.0, spec.accel_bias_stability, 3) if spec.accel_bias_stability else np.zeros(3)
    sg = spec.gyro_bias_stability / 60.0 * math.sqrt(dt)
    sa = spec.accel_bias_stability / 60.0 * math.sqrt(dt)

    wind = np.asarray(sc.wind.mean, dtype=float)
    R_an, va, alpha, beta, V = g.attitude(0.0)
    R_ab = rab_from_angles(alpha, beta)
    state = FullState(
        R_bn=R_an @ R_ab.T,
        v_n=va + wind,
        p_n=HEIGHT_ROW * sc.start_height,
        b_g=b_g,
        b_a=b_a,
        R_ab=R_ab,
        v_wind=wind,
    )
    records = []
    for k in range(N + 1):
        t = k * dt
        if k == N:
            omega, accel = records[-1].omega, records[-1].accel
            records.append(TruthRecord(t, state, alpha, beta, omega, accel, V))
            break
        g.advance(t, dt)
        wind_next = wind_step(wind, sc.wind.sigma, dt, rng_w)
        R_an1, va1, alpha1, beta1, V1 = g.attitude(t + dt)
        R_ab1 = rab_from_angles(alpha1, beta1)
        R_des = R_an1 @ R_ab1.T
        v_des = va1 + wind_next
        omega = so3_log(state.R_bn.T @ R_des) / dt
        accel = state.R_bn.T @ ((v_des - state.v_n) / dt - GRAVITY)
        records.append(TruthRecord(t, state, alpha, beta, omega, accel, V))
        nxt = strapdown_step(
            state.replace(b_g=np.zeros(3), b_a=np.zeros(3)), ImuSample(t + dt, omega, accel), dt
        )
        if sg:
            b_g = b_g + rng_b.normal(0.0, sg, 3)
        if sa:
            b_a = b_a + rng_b.normal(0.0, sa, 3)
        state = nxt.replace(b_g=b_g, b_a=b_a, R_ab=R_ab1, v_wind=wind_next)
        wind, alpha, beta, V = wind_next, alpha1, beta1, V1
    return _attach_controls(records, sc)


def _attach_controls(records, sc: Scenario):
    """Back-solve elevator and rudder so the force model holds exactly."""
    out = []
    c = sc.aero
    for rec in records:
        if rec.V > 2.0:
            C_L, C_Y, _ = equivalent_coefficients(rec.accel, rec.omega, rec.V, sc.airframe, rec.state.R_ab)
            p, q, r = rec.omega
            de = (C_L - c.C_L0 - c.C_La * rec.alpha - c.C_Lq * q) / c.C_Lde
            dr = (C_Y - c.C_Y0 - c.C_Yb * rec.beta - c.C_Yp * p - c.C_Yr * r) / c.C_Ydr
        else:
            de = dr = 0.0
        out.append(replace(rec, delta_e=de, delta_r=dr))
    return out


def synthesize_sensors(truth, spec: SensorSpec | None, sc: Scenario) -> list:
    """Sensor events for a truth sequence, sorted by time then channel."""
    if not truth:
        raise ValueError("truth sequence is empty")
    spec = sc.sensors if spec is None else spec
    dt = sc.dt
    rates = sc.rates
    rng = {name: _rng(sc.seed, name) for name in CHANNELS}
    sg = spec.gyro_arw / math.sqrt(dt)
    sa = spec.accel_vrw / math.sqrt(dt)
    dec = {name: rates.decimation(name) for name in ("gnss", "baro", "mag", "pitot", "aero")}

    def noise(ch, sigma, size=3):
        if sigma == 0.0:
            return np.zeros(size) if size else 0.0
        return rng[ch].normal(0.0, sigma, size) if size else float(rng[ch].normal(0.0, sigma))

    events = []
    for k, rec in enumerate(truth):
        t = rec.t
        if k > 0:
            prev = truth[k - 1]
            omega = prev.omega + prev.state.b_g + noise("imu", sg)
            accel = prev.accel + prev.state.b_a + noise("imu", sa)
            events.append(SensorEvent(t, ImuSample(t, omega, accel)))
        s = rec.state
        if dec["gnss"] and k % dec["gnss"] == 0:
            events.append(
                SensorEvent(t, GnssFix(s.p_n + noise("gnss", spec.gnss_pos), s.v_n + noise("gnss", spec.gnss_vel)))
            )
        if dec["baro"] and k % dec["baro"] == 0:
            P = height_to_pressure(sc.origin_altitude + float(HEIGHT_ROW @ s.p_n))
            events.append(SensorEvent(t, BaroReading(P + noise("baro", spec.baro, 0))))
        if dec["mag"] and k % dec["mag"] == 0:
            events.append(SensorEvent(t, MagReading(s.R_bn.T @ MAG_REFERENCE + noise("mag", spec.mag))))
        if dec["pitot"] and k % dec["pitot"] == 0:
            events.append(SensorEvent(t, AirspeedReading(rec.V + noise("pitot", spec.pitot, 0))))
        if dec["aero"] and k % dec["aero"] == 0:
            events.append(
                SensorEvent(
                    t,
                    AeroReading(
                        delta_e=rec.delta_e + noise("aero", spec.rudder, 0),
                        delta_r=rec.delta_r + noise("aero", spec.rudder, 0),
                        alpha=rec.alpha + noise("aero", spec.aero_alpha, 0),
                        beta=rec.beta + noise("aero", spec.aero_beta, 0),
                        alpha_true=rec.alpha,
                        beta_true=rec.beta,
                    ),
                )
            )
    events.sort(key=lambda ev: (ev.t, KIND_ORDER[ev.kind]))
    return events


def apply_denial(stream, windows) -> list:
    """Drop GNSS events with ``t0 <= t <= t1`` for any window."""
    windows = [tuple(w) for w in windows]
    for t0, t1 in windows:
        if not t0 <= t1:
            raise ValueError(f"invalid denial window {(t0, t1)}")
    return [
        ev
        for ev in stream
        if not (ev.kind == "GNSS" and any(t0 <= ev.t <= t1 for t0, t1 in windows))
    ]


@dataclass
class Simulation:
    scenario: Scenario
    truth: list
    events: list


def simulate(sc: Scenario) -> Simulation:
    """Truth, sensor events and denial windows applied, in one call."""
    truth = generate_trajectory(sc)
    events = synthesize_sensors(truth, sc.sensors, sc)
    if sc.denial:
        events = apply_denial(events, sc.denial)
    return Simulation(sc, truth, events)


def mixed_phase_scenario(seed=0, sensors: SensorSpec | None = None, **overrides) -> Scenario:
    """Five-minute route with climb, turns, cruise and descent."""
    segments = (
        Segment("cruise", 30.0, speed=18.0),
        Segment("climb", 40.0, speed=20.0, climb_rate=2.0),
        Segment("turn", 50.0, speed=20.0, turn_rate=0.08),
        Segment("cruise", 60.0, speed=22.0),
        Segment("turn", 40.0, speed=20.0, turn_rate=-0.1),
        Segment("descend", 40.0, speed=18.0, climb_rate=1.5),
        Segment("cruise", 40.0, speed=18.0),
    )
    kw = dict(seed=seed, segments=segments, wind=WindSpec((2.0, -1.0, 0.0), 0.02))
    if sensors is not None:
        kw["sensors"] = sensors
    kw.update(overrides)
    return Scenario(**kw)
