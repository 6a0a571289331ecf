"""Command-line interface: ``uavnav <command> [options]``.

Commands
--------
simulate   scenario -> sensors.csv, truth.csv and a matching filter.toml
run        sensor log (+ truth) -> state.csv and metrics.json
sweep      initial-attitude convergence study -> sweep.csv, sweep_long.csv
denial     GNSS-denial study -> denial.csv
fit-aero   least-squares aerodynamic identification from a log
predict    batch AOA/SA prediction (LSTM or LS) from a log

Exit status is 0 on success, 1 for usage errors and 2 for data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .airdata import (
    AirframeParams,
    AeroCoefficients,
    LsPredictor,
    LstmPredictor,
    aero_samples,
    fit_from_samples,
    load_lstm_weights,
    predict_samples,
)
from .config import FilterConfig, dump_config, load_config
from .logio import read_sensor_log, read_truth_log, write_sensor_log, write_state_log, write_truth_log
from .metrics import compute_metrics
from .simulator import SensorSpec, mixed_phase_scenario, simulate
from .state import Variant
from .updates import run_filter

SCENARIOS = {
    "mixed": mixed_phase_scenario,
    "convergence": ex.convergence_scenario,
    "denial": ex.denial_scenario,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _biases(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid bias list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty bias list")
    bad = [v for v in vals if not abs(v) <= ex.MAX_BIAS_DEG]
    if bad:
        raise argparse.ArgumentTypeError(f"biases must lie within +-{ex.MAX_BIAS_DEG:g} deg: {bad}")
    return vals


def _variants(text, extra=()):
    out = []
    for name in text.split(","):
        name = name.strip()
        if name.upper() in extra:
            out.append(name.upper())
            continue
        try:
            out.append(Variant.parse(name).value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"unknown variant {name!r}") from None
    return out


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _scenario(args):
    sc = SCENARIOS[args.scenario](seed=args.seed)
    if getattr(args, "noiseless", False):
        from dataclasses import replace

        sc = replace(sc, sensors=SensorSpec.noiseless())
    return sc


def _config(args, default=None) -> FilterConfig:
    if args.config:
        return load_config(args.config)
    return default if default is not None else FilterConfig()


def cmd_simulate(args):
    sc = _scenario(args)
    sim = simulate(sc)
    out = args.out_dir
    write_sensor_log(sim.events, out / "sensors.csv")
    write_truth_log(sim.truth, out / "truth.csv")
    (out / "filter.toml").write_text(dump_config(ex.matched_config(sc)), encoding="utf-8")
    print(f"{len(sim.events)} events, {sc.duration:g} s -> {out}")


def cmd_run(args):
    events = read_sensor_log(args.log)
    truth = read_truth_log(args.truth) if args.truth else None
    cfg = _config(args)
    variant = args.variant or cfg.filter.variant
    init = args.init or ("truth" if truth else "align")
    if init == "truth":
        if truth is None:
            raise UsageError("--init truth requires --truth")
        import numpy as np

        state0 = truth[0].state.replace(b_g=np.zeros(3), b_a=np.zeros(3))
        t0 = truth[0].t
    else:
        state0 = t0 = None
    hist = run_filter(events, cfg, variant=variant, state0=state0, t0=t0)
    write_state_log(hist, args.out_dir / "state.csv")
    if truth is not None:
        report = compute_metrics(hist, truth)
        data = report.to_dict()
        data["variant"] = Variant.parse(variant).value
        _write_json(data, args.out_dir / "metrics.json")
        att = report.channels["attitude"].rmse
        print(f"{data['variant']}: attitude RMSE {att:.4g} deg, {report.samples} epochs")
    else:
        print(f"{len(hist)} epochs -> {args.out_dir / 'state.csv'}")


def cmd_sweep(args):
    sc = ex.convergence_scenario(seed=args.seed)
    cfg = _config(args, ex.convergence_config(sc))
    seeds = range(args.seed, args.seed + args.seeds)
    rows = ex.convergence_sweep(sc, cfg, args.biases, args.variant, seeds=seeds, workers=args.workers)
    cols = ["seed", "bias", "variant", "time_to_converge", "post_convergence_rmse"]
    ex.write_rows(rows, args.out_dir / "sweep.csv", cols)
    ex.write_rows(ex.long_format(rows), args.out_dir / "sweep_long.csv", ["seed", "bias", "variant", "metric", "value"])
    print(f"{len(rows)} rows -> {args.out_dir / 'sweep.csv'}")
    names = set(args.variant)
    if {"RIEKF", "ESEKF"} <= names:
        s = ex.summarize_sweep(rows)
        print(f"RIEKF <= ESEKF: time to converge {s['ttc_fraction']:.0%}, post-convergence RMSE "
              f"{s['rmse_fraction']:.0%} of {s['runs']} runs")


def cmd_denial(args):
    sc = ex.denial_scenario(seed=args.seed)
    cfg = _config(args, ex.matched_config(sc))
    rows = ex.denial_experiment(sc, cfg, args.variant, workers=args.workers)
    ex.write_rows(rows, args.out_dir / "denial.csv")
    for r in rows:
        print(f"{r['variant']:6s} max horizontal {r['max_horizontal_error']:8.2f} m  "
              f"max vertical {r['max_vertical_error']:8.2f} m")


def _airframe(args):
    return AirframeParams(m=args.mass, S=args.wing_area)


def cmd_fit_aero(args):
    fit = fit_from_samples(aero_samples(read_sensor_log(args.log)), _airframe(args))
    data = {
        "coefficients": fit.coefficients.to_dict(),
        "lift_rms": fit.lift_rms,
        "side_rms": fit.side_rms,
        "lift_stderr": [float(x) for x in fit.lift_stderr],
        "side_stderr": [float(x) for x in fit.side_stderr],
    }
    _write_json(data, args.out_dir / "aero_fit.json")
    _write_json(data["coefficients"], args.out_dir / "aero_coefficients.json")
    print(" ".join(f"{k}={v:.4g}" for k, v in data["coefficients"].items()))


def cmd_predict(args):
    af = _airframe(args)
    if args.model == "ls":
        if args.coefficients:
            coef = AeroCoefficients.from_dict(json.loads(Path(args.coefficients).read_text(encoding="utf-8")))
        else:
            coef = AeroCoefficients()
        predictor = LsPredictor(coef, af)
    else:
        if args.weights:
            weights = load_lstm_weights(args.weights)
        else:
            from .data import default_lstm_path

            weights = load_lstm_weights(default_lstm_path())
        predictor = LstmPredictor(weights, af)
    samples = aero_samples(read_sensor_log(args.log))
    rows = predict_samples(samples, predictor, af)
    full = [(t, a, b, s.alpha_true, s.beta_true) for (t, a, b), s in zip(rows, samples)]
    ex.write_rows(full, args.out_dir / "predictions.csv", ["t", "alpha", "beta", "alpha_true", "beta_true"])
    print(f"{len(rows)} predictions -> {args.out_dir / 'predictions.csv'}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="scenario seed (default 0)")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    common.add_argument("--config", help="filter configuration TOML")
    common.add_argument("-v", "--verbose", action="store_true", help="log rejected measurements")

    p = _Parser(prog="uavnav", description="Invariant EKF navigation for fixed-wing UAVs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="synthesize a sensor log and truth")
    s.add_argument("--scenario", choices=sorted(SCENARIOS), default="mixed")
    s.add_argument("--noiseless", action="store_true", help="zero every sensor error")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("run", parents=[common], help="filter a sensor log")
    s.add_argument("--log", required=True, help="sensor CSV")
    s.add_argument("--truth", help="truth CSV; enables metrics.json")
    s.add_argument("--variant", type=lambda x: _variants(x)[0], help="RIEKF, LIEKF or ESEKF")
    s.add_argument("--init", choices=("truth", "align"), help="initial state source")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="initial-attitude convergence study")
    s.add_argument("--biases", type=_biases, default=list(ex.DEFAULT_BIASES),
                   help="comma-separated roll/pitch offsets in deg")
    s.add_argument("--variant", type=_variants, default=["RIEKF", "ESEKF"], help="comma-separated variants")
    s.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds from --seed")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("denial", parents=[common], help="GNSS-denial resilience study")
    s.add_argument("--variant", type=lambda x: _variants(x, (ex.PURE_INERTIAL,)),
                   default=["RIEKF", "LIEKF", "ESEKF", ex.PURE_INERTIAL],
                   help="comma-separated variants; INS is the pure-inertial control")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_denial)

    af = AirframeParams()
    for name, func, text in (("fit-aero", cmd_fit_aero, "identify aero coefficients from a log"),
                             ("predict", cmd_predict, "predict AOA/SA over a log")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--log", required=True, help="sensor CSV")
        s.add_argument("--mass", type=float, default=af.m, help="airframe mass, kg")
        s.add_argument("--wing-area", type=float, default=af.S, help="wing area, m^2")
        s.set_defaults(func=func)
        if name == "predict":
            s.add_argument("--model", choices=("lstm", "ls"), default="lstm")
            s.add_argument("--weights", help="LSTM weights JSON (default: bundled)")
            s.add_argument("--coefficients", help="aero coefficients JSON for --model ls")
    return p


def _join_negative_lists(argv):
    # "--biases -30,-15" would otherwise read the list as an option
    out = []
    it = iter(argv)
    for a in it:
        if a == "--biases":
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    argv = _join_negative_lists(sys.argv[1:] if argv is None else list(argv))
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seeds", 1) < 1 or getattr(args, "workers", 1) < 1:
            raise UsageError("--seeds and --workers must be positive")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(message)s")
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        args.func(args)
    except UsageError as exc:
        print(f"uavnav {args.command}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"uavnav {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
