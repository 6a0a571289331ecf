import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad_vec
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from uavnav.errors import NearSingularityError
from uavnav.lie import (
    SE23,
    left_jacobian,
    left_jacobian_inverse,
    rotation_angle,
    se23_adjoint,
    se23_adjoint_inverse,
    se23_exp,
    se23_hat,
    se23_log,
    se23_vee,
    skew,
    so3_exp,
    so3_log,
    vee,
)

vec3 = st.lists(st.floats(-1.7, 1.7, allow_nan=False), min_size=3, max_size=3).map(np.array)


def test_skew_is_cross_product(rng):
    a, b = rng.normal(size=(2, 3))
    np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-14)
    np.testing.assert_allclose(vee(skew(a)), a, atol=0)


@given(vec3)
def test_so3_exp_matches_matrix_exponential(theta):
    np.testing.assert_allclose(so3_exp(theta), expm(skew(theta)), atol=1e-12)


@given(vec3)
def test_so3_exp_matches_scipy_rotvec(theta):
    np.testing.assert_allclose(so3_exp(theta), Rotation.from_rotvec(theta).as_matrix(), atol=1e-12)


def test_so3_log_small_and_zero_angles():
    assert np.array_equal(so3_log(np.eye(3)), np.zeros(3))
    for phi in (1e-12, 1e-8, 1e-6, 1e-4):
        theta = np.array([phi, -2 * phi, 0.5 * phi])
        np.testing.assert_allclose(so3_log(so3_exp(theta)), theta, rtol=1e-9, atol=0)


def test_so3_log_near_pi_raises():
    R = so3_exp(np.array([0.0, 0.0, math.pi - 1e-8]))
    with pytest.raises(NearSingularityError):
        so3_log(R)
    # just inside the margin is fine
    theta = np.array([0.0, math.pi - 1e-3, 0.0])
    np.testing.assert_allclose(so3_log(so3_exp(theta)), theta, atol=1e-10)


def test_non_finite_inputs_rejected():
    with pytest.raises(ValueError):
        so3_exp([np.nan, 0, 0])
    with pytest.raises(ValueError):
        so3_log(np.full((3, 3), np.inf))


def test_rotation_angle(rng):
    theta = rng.normal(size=3)
    theta *= 2.0 / np.linalg.norm(theta)
    assert rotation_angle(so3_exp(theta)) == pytest.approx(2.0, abs=1e-13)


def _jl_quadrature(theta):
    # J_l(theta) = int_0^1 exp(s [theta]x) ds
    K = skew(theta)
    return quad_vec(lambda s: expm(s * K), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]


@pytest.mark.parametrize("scale", [1e-9, 1e-7, 1e-5, 0.3, 1.5, 3.0])
def test_left_jacobian_matches_quadrature(rng, scale):
    theta = rng.normal(size=3)
    theta *= scale / np.linalg.norm(theta)
    J = left_jacobian(theta)
    np.testing.assert_allclose(J, _jl_quadrature(theta), atol=1e-10)
    np.testing.assert_allclose(left_jacobian_inverse(theta) @ J, np.eye(3), atol=1e-10)


@given(vec3)
def test_left_jacobian_is_derivative_of_exp(theta):
    # exp(theta + d) ~= exp(J_l(theta) d) exp(theta)
    eps = 1e-6
    J = left_jacobian(theta)
    R0 = so3_exp(theta)
    for k in range(3):
        d = np.zeros(3)
        d[k] = eps
        lhs = so3_log(so3_exp(theta + d) @ R0.T)
        np.testing.assert_allclose(lhs / eps, J[:, k], atol=1e-5)


def test_se23_exp_matches_matrix_exponential(rng):
    for _ in range(20):
        xi = rng.normal(size=9)
        np.testing.assert_allclose(se23_exp(xi).matrix(), expm(se23_hat(xi)), atol=1e-11)


def test_se23_hat_vee_round_trip(rng):
    xi = rng.normal(size=9)
    np.testing.assert_array_equal(se23_vee(se23_hat(xi)), xi)


def test_se23_group_operations(rng):
    g = se23_exp(rng.normal(size=9))
    h = se23_exp(rng.normal(size=9))
    np.testing.assert_allclose((g @ h).matrix(), g.matrix() @ h.matrix(), atol=1e-12)
    np.testing.assert_allclose((g @ g.inverse()).matrix(), np.eye(5), atol=1e-12)
    np.testing.assert_allclose(SE23.from_matrix(g.matrix()).matrix(), g.matrix())


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=18, max_size=18))
def test_adjoint_conjugation(vals):
    vals = np.array(vals)
    g = se23_exp(np.concatenate([vals[:3] * 0.5, vals[3:9]]))
    xi = vals[9:]
    lhs = g.matrix() @ se23_hat(xi) @ g.inverse().matrix()
    np.testing.assert_allclose(se23_vee(lhs), g.adjoint() @ xi, atol=1e-9)
    np.testing.assert_allclose(
        se23_adjoint_inverse(g.R, g.v, g.p) @ se23_adjoint(g.R, g.v, g.p), np.eye(9), atol=1e-12
    )


def test_round_trips_bulk():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        axis = rng.normal(size=3)
        theta = axis / np.linalg.norm(axis) * rng.uniform(0, 3.0)
        worst = max(worst, np.abs(so3_log(so3_exp(theta)) - theta).max())
        xi = np.concatenate([theta, rng.normal(size=6) * 10])
        worst = max(worst, np.abs(se23_log(se23_exp(xi)) - xi).max())
    assert worst < 1e-8
