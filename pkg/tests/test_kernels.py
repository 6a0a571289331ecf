"""Compiled kernels against the numpy reference."""

import numpy as np
import pytest
from conftest import random_state

from uavnav import _backend, _kernels_py
from uavnav.constants import GRAVITY
from uavnav.propagation import ImuSample, ProcessNoise, error_jacobians, propagate_covariance
from uavnav.state import N_ERR, Variant

compiled = pytest.importorskip("uavnav._kernels", reason="compiled kernels not built")

CODES = _kernels_py.VARIANT_CODES


def _spd(rng, n=N_ERR):
    A = rng.normal(size=(n, n))
    return A @ A.T / n + np.eye(n) * 0.01


def test_backend_reports_choice():
    assert _backend.BACKEND in ("cython", "python")


def test_environment_variable_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, UAVNAV_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import uavnav; print(uavnav.BACKEND)"], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("variant", list(Variant))
def test_predict_covariance_agrees(rng, variant):
    q = ProcessNoise(1e-6, 1e-4, 1e-10, 1e-8, 1e-4, 1e-4).diag()
    for _ in range(10):
        s = random_state(rng)
        P = _spd(rng)
        w, a = rng.normal(size=3), rng.normal(size=3) * 3
        args = (CODES[variant], P, s.R_bn, s.v_n, s.p_n, w, a, 0.01, q, GRAVITY)
        np.testing.assert_allclose(compiled.predict_covariance(*args), _kernels_py.predict_covariance(*args),
                                   rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("variant", list(Variant))
def test_predict_covariance_matches_explicit_transition(rng, variant):
    # Phi (P + G Q G^T dt) Phi^T equals the TransitionPair form
    q = ProcessNoise(1e-6, 1e-4, 1e-10, 1e-8, 1e-4, 1e-4)
    s = random_state(rng)
    P = _spd(rng)
    w, a = rng.normal(size=3), rng.normal(size=3)
    out = _kernels_py.predict_covariance(CODES[variant], P, s.R_bn, s.v_n, s.p_n, w, a, 0.01, q.diag(), GRAVITY)
    u = ImuSample(0.0, w + s.b_g, a + s.b_a)
    tp = error_jacobians(variant, s, u, 0.01, q)
    ref = propagate_covariance(P, tp)
    np.testing.assert_allclose(out, ref, rtol=1e-9, atol=1e-9 * np.abs(ref).max())


@pytest.mark.parametrize("k", [1, 3, 6])
def test_kalman_update_agrees(rng, k):
    for _ in range(10):
        P = _spd(rng)
        H = rng.normal(size=(k, N_ERR))
        Rm = _spd(rng, k)
        z = rng.normal(size=k)
        a = compiled.kalman_update(P, H, Rm, z, np.inf, 1e12)
        b = _kernels_py.kalman_update(P, H, Rm, z, np.inf, 1e12)
        assert a[0] == b[0] == 0
        np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(a[2], b[2], rtol=1e-10, atol=1e-12)
        assert a[3] == pytest.approx(b[3], rel=1e-10)


def test_kalman_update_status_codes(rng):
    P = _spd(rng)
    H = np.zeros((3, N_ERR))
    H[:, :3] = np.eye(3)
    Rm = np.eye(3) * 1e-4
    z = np.ones(3) * 100.0
    for impl in (compiled, _kernels_py):
        status, dx, P_new, d2 = impl.kalman_update(P, H, Rm, z, 7.8, 1e12)
        assert status == 1 and d2 > 7.8 and not dx.any()
        np.testing.assert_array_equal(P_new, P)
        status, *_ = impl.kalman_update(np.zeros((N_ERR, N_ERR)), H, -Rm, z, np.inf, 1e12)
        assert status == 2


def test_kalman_update_matches_textbook_gain(rng):
    P = _spd(rng)
    H = rng.normal(size=(2, N_ERR))
    Rm = np.diag([0.3, 0.2])
    z = rng.normal(size=2)
    S = H @ P @ H.T + Rm
    K = P @ H.T @ np.linalg.inv(S)
    I_KH = np.eye(N_ERR) - K @ H
    for impl in (compiled, _kernels_py):
        _, dx, P_new, d2 = impl.kalman_update(P, H, Rm, z, np.inf, 1e12)
        np.testing.assert_allclose(dx, K @ z, rtol=1e-10)
        np.testing.assert_allclose(P_new, I_KH @ P @ I_KH.T + K @ Rm @ K.T, rtol=1e-9, atol=1e-12)
        assert d2 == pytest.approx(z @ np.linalg.solve(S, z), rel=1e-10)


@pytest.mark.parametrize("variant", list(Variant))
def test_inject_error_agrees(rng, variant):
    for _ in range(20):
        s = random_state(rng)
        dx = rng.normal(size=N_ERR) * 0.5
        dx[:3] *= 10 ** rng.uniform(-9, 0)
        a = compiled.inject_error(CODES[variant], s.R_bn, s.v_n, s.p_n, s.R_ab, dx)
        b = _kernels_py.inject_error(CODES[variant], s.R_bn, s.v_n, s.p_n, s.R_ab, dx)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
