import numpy as np
import pytest

from uavnav.errors import LogFormatError
from uavnav.logio import (
    SENSOR_HEADER,
    STATE_HEADER,
    read_sensor_log,
    read_truth_log,
    write_sensor_log,
    write_state_log,
    write_truth_log,
)
from uavnav.simulator import Rates, Scenario, Segment, simulate
from uavnav.updates import FilterConfig, run_filter


@pytest.fixture(scope="module")
def sim():
    rates = Rates(imu=50.0, gnss=5.0, baro=10.0, mag=10.0, pitot=10.0, aero=10.0)
    return simulate(Scenario(segments=(Segment("turn", 3.0, turn_rate=0.1),), rates=rates))


def test_sensor_log_round_trip_is_exact(sim, tmp_path):
    path = tmp_path / "s.csv"
    write_sensor_log(sim.events, path)
    back = read_sensor_log(path)
    assert len(back) == len(sim.events)
    for a, b in zip(sim.events, back):
        assert (a.t, a.kind) == (b.t, b.kind)
        for f in a.payload.__dataclass_fields__:
            np.testing.assert_array_equal(getattr(a.payload, f), getattr(b.payload, f))
    path2 = tmp_path / "s2.csv"
    write_sensor_log(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_truth_log_round_trip_is_exact(sim, tmp_path):
    path = tmp_path / "t.csv"
    write_truth_log(sim.truth, path)
    back = read_truth_log(path)
    for a, b in zip(sim.truth, back):
        assert a.t == b.t and a.alpha == b.alpha and a.V == b.V and a.delta_e == b.delta_e
        np.testing.assert_array_equal(a.state.R_bn, b.state.R_bn)
        np.testing.assert_array_equal(a.state.p_n, b.state.p_n)
        np.testing.assert_array_equal(a.state.v_wind, b.state.v_wind)
        np.testing.assert_array_equal(a.accel, b.accel)
        np.testing.assert_allclose(a.state.R_ab, b.state.R_ab, atol=1e-15)


def test_state_log(sim, tmp_path):
    hist = run_filter(sim.events, FilterConfig(), state0=sim.truth[0].state, t0=0.0)
    path = tmp_path / "state.csv"
    write_state_log(hist, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == STATE_HEADER
    assert len(lines) == len(hist) + 1


@pytest.mark.parametrize(
    "body",
    [
        "t,type\n",
        ",".join(SENSOR_HEADER) + "\n0.0,FOO,,,,,,,\n",
        ",".join(SENSOR_HEADER) + "\n0.0,IMU,1,2,3,4,5,,\n",
        ",".join(SENSOR_HEADER) + "\nx,BARO,1.0,,,,,,\n",
        ",".join(SENSOR_HEADER) + "\n0.0,BARO,1.0\n",
    ],
)
def test_malformed_sensor_logs(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(LogFormatError):
        read_sensor_log(path)


def test_malformed_truth_log(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x\n1,2\n")
    with pytest.raises(LogFormatError):
        read_truth_log(path)
