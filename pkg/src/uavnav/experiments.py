"""Initial-attitude convergence sweep and GNSS-denial study.

Both experiments run one filter per (scenario seed, variant, setting) and
return plain row dictionaries sorted by their keys, so the result does not
depend on the order in which a worker pool finishes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.spatial.transform import Rotation

from .airdata import AirframeParams
from .config import MAG_FIELD_MGAUSS, FilterConfig
from .constants import DEG
from .metrics import compute_metrics
from .simulator import Rates, Scenario, Segment, WindSpec, simulate
from .state import FullState, Variant
from .updates import run_filter

MAX_BIAS_DEG = 45.0
DEFAULT_BIASES = (-30.0, -15.0, 15.0, 30.0)
PURE_INERTIAL = "INS"

# Barometer height noise of the reference sensor (0.025 mbar is about 0.21 m
# at sea level), rounded up.
BARO_HEIGHT_SIGMA = 0.25


def matched_config(sc: Scenario, base: FilterConfig | None = None) -> FilterConfig:
    """Filter config whose noise levels match the scenario's sensors.

    Measurement variances follow the simulated sensor errors, and the
    accelerometer-bias process noise follows the simulated bias random walk.
    """
    base = base or FilterConfig()
    sp = sc.sensors
    cfg = base.with_noise(
        "R0",
        sigma_vG2=max(sp.gnss_vel, 1e-3) ** 2,
        sigma_pG2=max(sp.gnss_pos, 1e-3) ** 2,
        sigma_vTAS2=max(sp.pitot, 1e-2) ** 2,
        sigma_Hbaro2=BARO_HEIGHT_SIGMA**2,
        sigma_m2=max(sp.mag * MAG_FIELD_MGAUSS, 1e-2) ** 2,
    )
    cfg = cfg.with_noise("Q0", sigma_ba2=max((sp.accel_bias_stability / 60.0) ** 2, 1e-12))
    return cfg.with_options(baro_ref_altitude=sc.origin_altitude)


def convergence_config(sc: Scenario, base: FilterConfig | None = None) -> FilterConfig:
    """:func:`matched_config` with innovation gating off.

    Tens of degrees of initial attitude error put the first GNSS residuals
    far outside any chi-square gate, and a gated filter would never recover.
    """
    return matched_config(sc, base).with_options(gate_probability=0.0)


def convergence_scenario(seed=0, **overrides) -> Scenario:
    """One-minute ground roll, takeoff and S-turn from a standing start."""
    segments = (
        Segment("taxi", 10.0, speed=0.0),
        Segment("taxi", 10.0, speed=12.0, turn_rate=0.1),
        Segment("climb", 10.0, speed=20.0, climb_rate=2.0),
        Segment("turn", 15.0, speed=20.0, turn_rate=0.15),
        Segment("turn", 15.0, speed=20.0, turn_rate=-0.15),
    )
    kw = dict(
        seed=seed,
        segments=segments,
        rates=Rates(imu=50.0, gnss=5.0, baro=10.0, mag=10.0, pitot=10.0, aero=10.0),
        start_height=0.0,
    )
    kw.update(overrides)
    return Scenario(**kw)


def denial_scenario(seed=0, **overrides) -> Scenario:
    """195 s route (about 2.5 km over ground) with GNSS lost from 60 s to 190 s.

    A 5 kg airframe at 14 m/s keeps the trim angle of attack near 8 deg.
    """
    v = 14.0
    segments = (
        Segment("cruise", 20.0, speed=v),
        Segment("climb", 20.0, speed=v, climb_rate=2.0),
        Segment("turn", 30.0, speed=v, turn_rate=0.06),
        Segment("cruise", 30.0, speed=v),
        Segment("turn", 30.0, speed=v, turn_rate=-0.06),
        Segment("cruise", 30.0, speed=v),
        Segment("turn", 25.0, speed=v, turn_rate=0.05),
        Segment("cruise", 10.0, speed=v),
    )
    kw = dict(
        seed=seed,
        segments=segments,
        wind=WindSpec((-2.0, 1.0, 0.0), 0.02),
        rates=Rates(imu=100.0, gnss=5.0, baro=20.0, mag=20.0, pitot=20.0, aero=20.0),
        denial=((60.0, 190.0),),
        airframe=AirframeParams(m=5.0),
    )
    kw.update(overrides)
    return Scenario(**kw)


def ground_track_length(truth) -> float:
    p = np.array([r.state.p_n[:2] for r in truth])
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def biased_initial_state(state: FullState, bias_deg: float) -> FullState:
    """Truth state with ``bias_deg`` added to roll and pitch and zero IMU biases."""
    yaw, pitch, roll = Rotation.from_matrix(state.R_bn).as_euler("ZYX")
    b = bias_deg * DEG
    R = Rotation.from_euler("ZYX", [yaw, pitch + b, roll + b]).as_matrix()
    return state.replace(R_bn=R, b_g=np.zeros(3), b_a=np.zeros(3))


def _map(fn, tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _sweep_one(task):
    sc, cfg, biases, variants = task
    sim = simulate(sc)
    rows = []
    for bias in biases:
        state0 = biased_initial_state(sim.truth[0].state, bias)
        for var in variants:
            hist = run_filter(sim.events, cfg, variant=var, state0=state0, t0=sim.truth[0].t)
            rep = compute_metrics(hist, sim.truth)
            rows.append(
                {
                    "seed": sc.seed,
                    "bias": float(bias),
                    "variant": var.value,
                    "time_to_converge": rep.time_to_converge,
                    "post_convergence_rmse": rep.post_convergence_rmse,
                    "attitude_rmse": rep.channels["attitude"].rmse,
                }
            )
    return rows


def _sort_key(row):
    return tuple((k, row[k]) for k in ("seed", "bias", "variant") if k in row)


def convergence_sweep(sc: Scenario, cfg: FilterConfig, biases=DEFAULT_BIASES, variants=("RIEKF", "ESEKF"),
                      seeds=None, workers=1) -> list:
    """Run every variant from roll/pitch-biased initial attitudes.

    Parameters
    ----------
    sc : Scenario
        Template; its seed is replaced by each of ``seeds``.
    biases : sequence of float
        Roll and pitch offsets in degrees, each within +-45.
    seeds : sequence of int, optional
        Defaults to ``[sc.seed]``.
    workers : int
        Processes used; 1 runs inline.

    Returns
    -------
    list of dict
        One row per (seed, bias, variant) with ``time_to_converge`` (s, inf
        if never) and ``post_convergence_rmse`` (deg), sorted.
    """
    biases = [float(b) for b in biases]
    for b in biases:
        if not abs(b) <= MAX_BIAS_DEG:
            raise ValueError(f"bias {b} deg outside +-{MAX_BIAS_DEG}")
    variants = [Variant.parse(v) for v in variants]
    seeds = [sc.seed] if seeds is None else list(seeds)
    tasks = [(replace(sc, seed=s), cfg, biases, variants) for s in seeds]
    rows = [r for chunk in _map(_sweep_one, tasks, workers) for r in chunk]
    return sorted(rows, key=_sort_key)


def long_format(rows, metrics=("time_to_converge", "post_convergence_rmse")) -> list:
    """``(seed, bias, variant, metric, value)`` tuples of sweep rows."""
    out = [(r["seed"], r["bias"], r["variant"], m, r[m]) for r in rows for m in metrics]
    return sorted(out)


def _denial_one(task):
    sc, cfg, variant, window, truth_events = task
    truth, events = truth_events if truth_events is not None else _sim(sc)
    state0 = truth[0].state.replace(b_g=np.zeros(3), b_a=np.zeros(3))
    if variant == PURE_INERTIAL:
        var, freeze = Variant.RIEKF, window[0]
    else:
        var, freeze = Variant.parse(variant), None
    hist = run_filter(events, cfg, variant=var, state0=state0, t0=truth[0].t, freeze_time=freeze,
                      record_every=max(1, int(round(sc.rates.imu / 10.0))))
    rep = compute_metrics(hist, truth, window=window)
    return {
        "seed": sc.seed,
        "variant": variant,
        "max_horizontal_error": rep.max_horizontal_error,
        "max_vertical_error": rep.max_vertical_error,
        "position_rmse": math.sqrt(sum(rep.channels[f"pos_{a}"].rmse ** 2 for a in "ned")),
    }


def _sim(sc):
    sim = simulate(sc)
    return sim.truth, sim.events


def denial_experiment(sc: Scenario, cfg: FilterConfig, variants=("RIEKF", "LIEKF", "ESEKF", PURE_INERTIAL),
                      window=None, workers=1) -> list:
    """Maximum position errors during a GNSS outage.

    The ``"INS"`` entry is the pure-inertial control: the right-invariant
    filter with every measurement update switched off from the window start.

    Parameters
    ----------
    window : (t0, t1), optional
        Evaluation window; defaults to the scenario's first denial window,
        or the whole flight when it has none.
    """
    if window is None:
        window = sc.denial[0] if sc.denial else (0.0, sc.duration)
    t0, t1 = (float(w) for w in window)
    if not 0.0 <= t0 <= t1 <= sc.duration:
        raise ValueError(f"invalid denial window {window}")
    names = []
    for v in variants:
        names.append(PURE_INERTIAL if str(v).upper() == PURE_INERTIAL else Variant.parse(v).value)
    shared = _sim(sc) if workers <= 1 else None
    tasks = [(sc, cfg, name, (t0, t1), shared) for name in names]
    return sorted(_map(_denial_one, tasks, workers), key=lambda r: (r["seed"], r["variant"]))


def _fmt(x):
    if isinstance(x, float):
        return "inf" if math.isinf(x) else ("nan" if math.isnan(x) else repr(float(x)))
    return str(x)


def write_rows(rows, path, columns=None):
    """CSV of row dictionaries (or tuples with ``columns``), LF line endings."""
    rows = list(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if rows and isinstance(rows[0], dict):
            columns = columns or list(rows[0])
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in columns])
        else:
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(x) for x in r])


def summarize_sweep(rows, a="RIEKF", b="ESEKF") -> dict:
    """Fraction of (seed, bias) pairs where ``a`` is at least as good as ``b``."""
    by = {}
    for r in rows:
        by.setdefault((r["seed"], r["bias"]), {})[r["variant"]] = r
    pairs = [v for v in by.values() if a in v and b in v]
    if not pairs:
        raise ValueError(f"rows contain no {a}/{b} pairs")

    def le(x, y):
        if math.isnan(x):
            return math.isnan(y)
        return math.isnan(y) or x <= y

    ttc = sum(p[a]["time_to_converge"] <= p[b]["time_to_converge"] for p in pairs)
    rmse = sum(le(p[a]["post_convergence_rmse"], p[b]["post_convergence_rmse"]) for p in pairs)
    return {"runs": len(pairs), "ttc_fraction": ttc / len(pairs), "rmse_fraction": rmse / len(pairs)}
