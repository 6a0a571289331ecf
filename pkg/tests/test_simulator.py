import math
from dataclasses import replace

import numpy as np
import pytest

from uavnav.airdata import equivalent_coefficients
from uavnav.constants import MAG_REFERENCE
from uavnav.propagation import ImuSample, strapdown_step
from uavnav.simulator import (
    Rates,
    Scenario,
    Segment,
    SensorSpec,
    WindSpec,
    generate_trajectory,
    mixed_phase_scenario,
    simulate,
    synthesize_sensors,
)
from uavnav.updates import pressure_to_height

FAST = Rates(imu=100.0, gnss=100.0, baro=100.0, mag=100.0, pitot=100.0, aero=100.0)


@pytest.fixture(scope="module")
def long_cruise():
    sc = Scenario(seed=3, segments=(Segment("cruise", 100.0),), rates=FAST)
    return sc, generate_trajectory(sc)


def _by_kind(events, kind):
    return [ev for ev in events if ev.kind == kind]


def _stack(events, attr):
    return np.array([getattr(ev.payload, attr) for ev in events], dtype=float)


def test_sensor_noise_statistics(long_cruise):
    sc, truth = long_cruise
    spec = sc.sensors
    noisy = synthesize_sensors(truth, spec, sc)
    clean = synthesize_sensors(truth, replace(SensorSpec.noiseless(),
                                              gyro_bias_stability=spec.gyro_bias_stability,
                                              accel_bias_stability=spec.accel_bias_stability), sc)
    dt = sc.dt
    checks = [
        ("IMU", "omega", spec.gyro_arw / math.sqrt(dt)),
        ("IMU", "accel", spec.accel_vrw / math.sqrt(dt)),
        ("GNSS", "p_n", spec.gnss_pos),
        ("GNSS", "v_n", spec.gnss_vel),
        ("MAG", "m_b", spec.mag),
        ("BARO", "P_s", spec.baro),
        ("TAS", "V_TAS", spec.pitot),
        ("AERO", "alpha", spec.aero_alpha),
        ("AERO", "beta", spec.aero_beta),
        ("AERO", "delta_r", spec.rudder),
    ]
    for kind, attr, sigma in checks:
        d = _stack(_by_kind(noisy, kind), attr) - _stack(_by_kind(clean, kind), attr)
        assert d.size >= 10_000, (kind, attr)
        assert np.std(d) == pytest.approx(sigma, rel=0.1), (kind, attr)
        assert abs(np.mean(d)) < 4 * sigma / math.sqrt(d.size) * 1.5 + 1e-15, (kind, attr)


def test_bias_and_wind_random_walks():
    sc = Scenario(seed=1, segments=(Segment("cruise", 100.0),), wind=WindSpec((1.0, 0.0, 0.0), 0.05))
    truth = generate_trajectory(sc)
    dt = sc.dt
    db = np.diff([r.state.b_a for r in truth], axis=0)[:-1]
    dg = np.diff([r.state.b_g for r in truth], axis=0)[:-1]
    dw = np.diff([r.state.v_wind for r in truth], axis=0)[:-1]
    spec = sc.sensors
    assert np.std(db) == pytest.approx(spec.accel_bias_stability / 60.0 * math.sqrt(dt), rel=0.1)
    assert np.std(dg) == pytest.approx(spec.gyro_bias_stability / 60.0 * math.sqrt(dt), rel=0.1)
    assert np.std(dw) == pytest.approx(0.05 * math.sqrt(dt), rel=0.1)


def test_simulation_is_deterministic():
    sc = mixed_phase_scenario(seed=7, segments=(Segment("turn", 5.0, turn_rate=0.1),))
    a, b = simulate(sc), simulate(sc)
    assert len(a.events) == len(b.events)
    for x, y in zip(a.events, b.events):
        assert x.t == y.t and x.kind == y.kind
        for f in x.payload.__dataclass_fields__:
            np.testing.assert_array_equal(getattr(x.payload, f), getattr(y.payload, f))
    c = simulate(replace(sc, seed=8))
    assert any(not np.array_equal(x.payload.omega, y.payload.omega)
               for x, y in zip(_by_kind(a.events, "IMU"), _by_kind(c.events, "IMU")))


def test_scenario_validation():
    with pytest.raises(ValueError, match="calm air"):
        Scenario(segments=(Segment("taxi", 5.0, speed=3.0),), wind=WindSpec((1.0, 0.0, 0.0)))
    with pytest.raises(ValueError):
        Scenario(rates=Rates(imu=100.0, gnss=3.0))
    with pytest.raises(ValueError):
        Scenario(denial=((10.0, 100.0),))
    with pytest.raises(ValueError):
        Segment("loop", 5.0)
    with pytest.raises(ValueError):
        Segment("cruise", 5.0, speed=0.0)


def test_denial_drops_only_gnss_inside_window():
    sc = Scenario(segments=(Segment("cruise", 20.0),), denial=((5.0, 12.0),))
    sim = simulate(sc)
    ref = simulate(replace(sc, denial=()))
    gnss_t = [ev.t for ev in _by_kind(sim.events, "GNSS")]
    assert not any(5.0 <= t <= 12.0 for t in gnss_t)
    assert len(gnss_t) == 101 - 36
    assert len(_by_kind(sim.events, "BARO")) == len(_by_kind(ref.events, "BARO"))


def test_event_counts_and_order():
    sc = Scenario(segments=(Segment("cruise", 10.0),))
    sim = simulate(sc)
    assert len(_by_kind(sim.events, "IMU")) == 1000
    assert len(_by_kind(sim.events, "GNSS")) == 51
    t = [ev.t for ev in sim.events]
    assert t == sorted(t)


def test_truth_is_kinematically_consistent():
    sc = mixed_phase_scenario(segments=(Segment("turn", 5.0, turn_rate=0.1), Segment("climb", 5.0, climb_rate=2.0)),
                              wind=WindSpec((2.0, -1.0, 0.0), 0.02))
    truth = generate_trajectory(sc)
    for a, b in zip(truth[:-1], truth[1:]):
        nxt = strapdown_step(a.state, ImuSample(b.t, a.omega + a.state.b_g, a.accel + a.state.b_a), sc.dt)
        np.testing.assert_allclose(nxt.R_bn, b.state.R_bn, atol=1e-10)
        np.testing.assert_allclose(nxt.v_n, b.state.v_n, atol=1e-9)
        np.testing.assert_allclose(nxt.p_n, b.state.p_n, atol=1e-9)
        # wind triangle
        v_air = b.state.R_bn @ b.state.R_ab[:, 0] * b.V
        np.testing.assert_allclose(b.state.v_n - v_air, b.state.v_wind, atol=1e-9)


def test_controls_satisfy_force_model():
    sc = mixed_phase_scenario(segments=(Segment("turn", 5.0, turn_rate=0.1),))
    c = sc.aero
    for rec in generate_trajectory(sc)[::50]:
        C_L, C_Y, _ = equivalent_coefficients(rec.accel, rec.omega, rec.V, sc.airframe, rec.state.R_ab)
        p, q, r = rec.omega
        assert C_L == pytest.approx(c.lift(rec.alpha, q, rec.delta_e), abs=1e-10)
        assert C_Y == pytest.approx(c.side(rec.beta, rec.delta_r, p, r), abs=1e-10)


def test_noiseless_measurements_are_exact():
    sc = Scenario(segments=(Segment("cruise", 2.0),), sensors=SensorSpec.noiseless())
    sim = simulate(sc)
    truth = {round(r.t, 9): r for r in sim.truth}
    for ev in sim.events:
        rec = truth[round(ev.t, 9)]
        if ev.kind == "MAG":
            np.testing.assert_allclose(ev.payload.m_b, rec.state.R_bn.T @ MAG_REFERENCE, atol=1e-15)
        elif ev.kind == "BARO":
            h = pressure_to_height(ev.payload.P_s) - sc.origin_altitude
            assert h == pytest.approx(-rec.state.p_n[2], abs=1e-6)
        elif ev.kind == "GNSS":
            np.testing.assert_array_equal(ev.payload.p_n, rec.state.p_n)


def test_taxi_start_is_level_and_still():
    from uavnav.experiments import convergence_scenario

    truth = generate_trajectory(convergence_scenario())
    first = truth[: 5 * 50]
    assert max(np.linalg.norm(r.state.v_n) for r in first) == 0.0
    assert max(abs(r.alpha) for r in first) == 0.0
