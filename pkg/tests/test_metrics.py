import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavnav.lie import so3_exp
from uavnav.metrics import compute_metrics, mae, rmse, time_to_converge
from uavnav.simulator import Scenario, Segment, generate_trajectory
from uavnav.updates import StateHistory


@pytest.fixture(scope="module")
def truth():
    return generate_trajectory(Scenario(segments=(Segment("turn", 20.0, turn_rate=0.1),)))


def _history(truth, every=1, perturb=None):
    h = StateHistory()
    for r in truth[::every]:
        s = r.state if perturb is None else perturb(r)
        h.append(r.t, s, np.zeros(21))
    return h


def test_mae_rmse_hand_values():
    assert mae([1.0, -1.0, 3.0]) == pytest.approx(5.0 / 3.0)
    assert rmse([1.0, -1.0, 3.0]) == pytest.approx(math.sqrt(11.0 / 3.0))
    with pytest.raises(ValueError):
        rmse([])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_mae_never_exceeds_rmse(xs):
    assert mae(xs) <= rmse(xs) * (1 + 1e-12) + 1e-12


def test_time_to_converge():
    t = np.arange(0.0, 20.0, 0.5)
    err = np.where(t < 4.0, 10.0, 1.0)
    err[t == 6.0] = 3.0  # one excursion restarts the hold
    assert time_to_converge(t, err, threshold=2.0, hold=5.0) == pytest.approx(6.5)
    assert time_to_converge(t, np.full_like(t, 5.0)) == math.inf


def test_zero_error(truth):
    rep = compute_metrics(_history(truth), truth)
    for name, ch in rep.channels.items():
        assert ch.rmse < 1e-6, name
    assert rep.time_to_converge == 0.0
    assert rep.samples == len(truth)


def test_constant_position_offset(truth):
    off = np.array([3.0, -4.0, 2.0])
    rep = compute_metrics(_history(truth, perturb=lambda r: r.state.replace(p_n=r.state.p_n + off)), truth,
                          window=(5.0, 10.0))
    assert rep.channels["pos_n"].mae == pytest.approx(3.0)
    assert rep.channels["pos_e"].rmse == pytest.approx(4.0)
    assert rep.max_horizontal_error == pytest.approx(5.0)
    assert rep.max_vertical_error == pytest.approx(2.0)


def test_constant_attitude_offset(truth):
    d = np.radians([0.0, 0.0, 3.0])
    rep = compute_metrics(_history(truth, perturb=lambda r: r.state.replace(R_bn=so3_exp(d) @ r.state.R_bn)), truth)
    assert rep.channels["attitude"].rmse == pytest.approx(3.0, abs=1e-9)
    assert rep.channels["yaw"].mae == pytest.approx(3.0, abs=1e-6)
    assert rep.time_to_converge == math.inf
    assert math.isnan(rep.post_convergence_rmse)


def test_interpolated_truth_matches_on_subsampled_estimates(truth):
    # estimates at half-step times: truth interpolation should be close
    h = StateHistory()
    for a, b in zip(truth[:-1:7], truth[1::7]):
        h.append(a.t, a.state, np.zeros(21))
    rep = compute_metrics(h, truth)
    assert rep.channels["attitude"].rmse < 1e-6


def test_no_overlap_raises(truth):
    h = StateHistory()
    h.append(1e6, truth[0].state, np.zeros(21))
    with pytest.raises(ValueError):
        compute_metrics(h, truth)


def test_report_to_dict_is_json_safe(truth):
    import json

    rep = compute_metrics(_history(truth, every=10), truth)
    data = rep.to_dict()
    json.dumps(data, allow_nan=False)
    assert data["max_horizontal_error"] is None
