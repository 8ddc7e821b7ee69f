import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptquad import so3
from adaptquad.errors import Degenerate, NotSkew

vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)
angle = st.floats(-np.pi, np.pi)


def test_hat_examples():
    assert np.array_equal(so3.hat([0, 0, 0]), np.zeros((3, 3)))
    np.testing.assert_array_equal(so3.hat([0, 0, 1]), [[0, -1, 0], [1, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(so3.vee(so3.hat([1, 2, 3])), [1, 2, 3])


def test_vee_examples():
    np.testing.assert_array_equal(so3.vee(np.zeros((3, 3))), [0, 0, 0])
    np.testing.assert_array_equal(so3.vee(so3.hat([-4, 0, 0.5])), [-4, 0, 0.5])


def test_vee_rejects_non_skew():
    M = so3.hat([1, 2, 3])
    M[0, 0] = 1e-3
    with pytest.raises(NotSkew):
        so3.vee(M)


@given(vec3, vec3)
def test_hat_is_cross_product(a, b):
    np.testing.assert_allclose(so3.hat(a) @ b, np.cross(a, b), atol=1e-12)
    np.testing.assert_allclose(so3.cross(a, b), np.cross(a, b), atol=1e-12)


def test_psi_examples():
    I = np.eye(3)
    assert so3.attitude_error_psi(I, I) == 0.0
    assert so3.attitude_error_psi(so3.rot_z(np.pi), I) == pytest.approx(2.0)
    assert so3.attitude_error_psi(so3.rot_x(np.pi / 2), I) == pytest.approx(1.0)


def test_rotation_error_examples():
    I = np.eye(3)
    np.testing.assert_allclose(so3.rotation_error(I, I), 0.0)
    np.testing.assert_allclose(so3.rotation_error(so3.rot_z(np.pi / 2), I), [0, 0, 1], atol=1e-15)


def test_angular_velocity_error_examples():
    I = np.eye(3)
    W = np.array([0.3, -0.2, 0.1])
    np.testing.assert_allclose(so3.angular_velocity_error(W, I, I, W), 0.0)
    np.testing.assert_allclose(so3.angular_velocity_error(W, so3.rot_y(0.4), I, np.zeros(3)), W)
    e = so3.angular_velocity_error(W, so3.rot_z(np.pi), I, [1, 0, 0])
    np.testing.assert_allclose(e, W - np.array([-1, 0, 0]), atol=1e-15)


@settings(max_examples=50)
@given(st.integers(0, 2**31))
def test_psi_range_and_error_norm(seed):
    rng = np.random.default_rng(seed)
    R, Rd = so3.random_rotation(rng), so3.random_rotation(rng)
    psi = so3.attitude_error_psi(R, Rd)
    assert -1e-12 <= psi <= 2 + 1e-12
    # |e_R|^2 = psi (2 - psi)
    e = so3.rotation_error(R, Rd)
    assert e @ e == pytest.approx(psi * (2 - psi), abs=1e-12)


def test_orthonormalize_examples():
    rng = np.random.default_rng(1)
    R = so3.random_rotation(rng)
    np.testing.assert_allclose(so3.orthonormalize(R), R, atol=1e-12)
    M = np.eye(3) + 1e-5 * so3.hat([1, 1, 1])
    Q = so3.orthonormalize(M)
    assert so3.is_rotation(Q)
    assert np.abs(Q - M).max() < 1e-5
    np.testing.assert_allclose(so3.orthonormalize(1.0001 * R), R, atol=1e-12)


def test_orthonormalize_degenerate():
    with pytest.raises(Degenerate):
        so3.orthonormalize(np.diag([1.0, 1.0, 0.0]))


@given(vec3.filter(lambda w: np.linalg.norm(w) < 3.0))
def test_expm_matches_scipy(w):
    from scipy.linalg import expm
    np.testing.assert_allclose(so3.expm_so3(w), expm(so3.hat(w)), atol=1e-12)


def test_expm_small_angle_branch():
    w = np.array([1e-6, -2e-6, 3e-7])
    from scipy.linalg import expm
    np.testing.assert_allclose(so3.expm_so3(w), expm(so3.hat(w)), atol=1e-16)


@settings(max_examples=30)
@given(vec3.filter(lambda w: np.linalg.norm(w) < 2.0), vec3)
def test_dexpinv_inverts_left_jacobian(u, w):
    # d/dt exp(u(t)) = exp(u) hat(dexp(u, u_dot)); check dexpinv by finite differences
    udot = so3.dexpinv(u, w)
    h = 1e-6
    R0 = so3.expm_so3(u)
    dR = (so3.expm_so3(u + h * udot) - so3.expm_so3(u - h * udot)) / (2 * h)
    Wb = so3.vee(R0.T @ dR, tol=1e-5)
    np.testing.assert_allclose(Wb, w, atol=1e-6 * max(1.0, np.linalg.norm(w)))
