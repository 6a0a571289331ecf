import math

import numpy as np
import pytest

from uavnav import experiments as ex
from uavnav.metrics import compute_metrics
from uavnav.simulator import Segment, simulate
from uavnav.updates import run_filter

SHORT = (
    Segment("cruise", 6.0, speed=20.0),
    Segment("turn", 6.0, speed=20.0, turn_rate=0.15),
)


@pytest.fixture(scope="module")
def short_sc():
    return ex.convergence_scenario(seed=2, segments=SHORT, start_height=100.0)


def test_sweep_row_count_and_order(short_sc):
    rows = ex.convergence_sweep(short_sc, ex.convergence_config(short_sc), biases=[-15, 0, 15],
                                variants=["RIEKF", "LIEKF"], seeds=[0, 1])
    assert len(rows) == 2 * 3 * 2
    keys = [(r["seed"], r["bias"], r["variant"]) for r in rows]
    assert keys == sorted(keys)
    assert len(ex.long_format(rows)) == 2 * len(rows)


def test_zero_bias_converges_immediately(short_sc):
    rows = ex.convergence_sweep(short_sc, ex.convergence_config(short_sc), biases=[0.0],
                                variants=["RIEKF", "LIEKF", "ESEKF"])
    assert all(r["time_to_converge"] == 0.0 for r in rows)


def test_sweep_is_deterministic(short_sc, tmp_path):
    cfg = ex.convergence_config(short_sc)
    a = ex.convergence_sweep(short_sc, cfg, biases=[15.0], seeds=[3])
    b = ex.convergence_sweep(short_sc, cfg, biases=[15.0], seeds=[3])
    ex.write_rows(a, tmp_path / "a.csv")
    ex.write_rows(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_sweep_rejects_large_bias(short_sc):
    with pytest.raises(ValueError):
        ex.convergence_sweep(short_sc, ex.convergence_config(short_sc), biases=[50.0])


def test_biased_initial_state_offsets_roll_and_pitch():
    from scipy.spatial.transform import Rotation

    sim = simulate(ex.convergence_scenario(segments=SHORT))
    s0 = sim.truth[0].state
    s = ex.biased_initial_state(s0, 20.0)
    e0 = Rotation.from_matrix(s0.R_bn).as_euler("ZYX", degrees=True)
    e1 = Rotation.from_matrix(s.R_bn).as_euler("ZYX", degrees=True)
    np.testing.assert_allclose(e1 - e0, [0.0, 20.0, 20.0], atol=1e-9)
    assert not s.b_a.any()


def test_summarize_sweep():
    rows = [
        {"seed": 0, "bias": 15.0, "variant": "RIEKF", "time_to_converge": 1.0, "post_convergence_rmse": 0.5},
        {"seed": 0, "bias": 15.0, "variant": "ESEKF", "time_to_converge": 2.0, "post_convergence_rmse": 0.4},
        {"seed": 1, "bias": 15.0, "variant": "RIEKF", "time_to_converge": 1.0, "post_convergence_rmse": 0.3},
        {"seed": 1, "bias": 15.0, "variant": "ESEKF", "time_to_converge": math.inf,
         "post_convergence_rmse": math.nan},
    ]
    s = ex.summarize_sweep(rows)
    assert s == {"runs": 2, "ttc_fraction": 1.0, "rmse_fraction": 0.5}


def test_write_rows_formats_special_values(tmp_path):
    ex.write_rows([{"a": math.inf, "b": np.float64(0.1), "c": math.nan}], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "a,b,c\ninf,0.1,nan\n"


def test_denial_without_outage_matches_run_filter():
    sc = ex.denial_scenario(seed=1, segments=SHORT, denial=())
    cfg = ex.matched_config(sc)
    rows = ex.denial_experiment(sc, cfg, variants=["RIEKF"], window=(2.0, 10.0))
    sim = simulate(sc)
    state0 = sim.truth[0].state.replace(b_g=np.zeros(3), b_a=np.zeros(3))
    hist = run_filter(sim.events, cfg, variant="RIEKF", state0=state0, t0=0.0, record_every=10)
    rep = compute_metrics(hist, sim.truth, window=(2.0, 10.0))
    assert rows[0]["max_horizontal_error"] == rep.max_horizontal_error
    assert rows[0]["max_vertical_error"] == rep.max_vertical_error


def test_denial_rows_and_validation():
    sc = ex.denial_scenario(seed=0, segments=SHORT, denial=((4.0, 10.0),))
    rows = ex.denial_experiment(sc, ex.matched_config(sc), variants=["ESEKF", "INS", "riekf"])
    assert [r["variant"] for r in rows] == ["ESEKF", "INS", "RIEKF"]
    with pytest.raises(ValueError):
        ex.denial_experiment(sc, ex.matched_config(sc), window=(5.0, 100.0))


def test_default_denial_route_geometry():
    sc = ex.denial_scenario()
    t0, t1 = sc.denial[0]
    assert t1 - t0 == pytest.approx(130.0)
    length = ex.ground_track_length(simulate(sc).truth)
    assert 2000.0 < length < 3000.0
