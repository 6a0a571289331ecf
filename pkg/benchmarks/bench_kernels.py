"""Compiled kernels against the numpy fallback.

Times each hot kernel in isolation, then a full filter replay of a simulated
flight under both backends (the replay runs in a subprocess so the backend is
chosen at import)::

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from uavnav import _kernels_py
from uavnav.constants import GRAVITY
from uavnav.propagation import ProcessNoise

REPLAY = """
import time
from uavnav import BACKEND
from uavnav.experiments import convergence_scenario, matched_config
from uavnav.simulator import simulate
from uavnav.updates import run_filter
sc = convergence_scenario(seed=0)
sim = simulate(sc)
t = time.perf_counter()
run_filter(sim.events, matched_config(sc), state0=sim.truth[0].state, t0=0.0)
print(BACKEND, time.perf_counter() - t)
"""


def _inputs(rng):
    A = rng.normal(size=(21, 21))
    P = A @ A.T / 21 + np.eye(21) * 0.01
    R = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    if np.linalg.det(R) < 0:
        R[:, 0] *= -1
    H = rng.normal(size=(6, 21))
    return {
        "predict_covariance": (0, P, R, rng.normal(size=3), rng.normal(size=3), rng.normal(size=3),
                               rng.normal(size=3), 0.01, ProcessNoise().diag(), GRAVITY),
        "kalman_update": (P, H, np.eye(6) * 0.1, rng.normal(size=6), np.inf, 1e12),
        "inject_error": (0, R, rng.normal(size=3), rng.normal(size=3), np.eye(3), rng.normal(size=21) * 0.1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    try:
        from uavnav import _kernels as compiled
    except ImportError:
        compiled = None
        print("compiled kernels not built; timing the fallback only")
    inputs = _inputs(np.random.default_rng(0))
    print(f"{'kernel':22s} {'python us':>10s} {'cython us':>10s} {'speedup':>8s}")
    for name, call_args in inputs.items():
        py = timeit.timeit(lambda: getattr(_kernels_py, name)(*call_args), number=args.repeat) / args.repeat
        if compiled is None:
            print(f"{name:22s} {py * 1e6:10.1f}")
            continue
        cy = timeit.timeit(lambda: getattr(compiled, name)(*call_args), number=args.repeat) / args.repeat
        print(f"{name:22s} {py * 1e6:10.1f} {cy * 1e6:10.1f} {py / cy:7.1f}x")

    print("\nfilter replay, 60 s flight at 50 Hz")
    times = {}
    for pure in ("1", "0"):
        env = dict(os.environ, UAVNAV_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", REPLAY], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        times[backend] = float(secs)
        print(f"  {backend:8s} {float(secs):6.2f} s")
    if len(times) == 2:
        print(f"  speedup {times['python'] / times['cython']:.2f}x")


if __name__ == "__main__":
    main()
