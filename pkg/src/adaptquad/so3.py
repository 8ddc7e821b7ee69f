"""Rotation group helpers: skew maps, attitude errors and projection onto SO(3).

Rotations are stored as full 3x3 matrices mapping body to inertial coordinates.
"""
import numpy as np

from .errors import Degenerate, NotSkew

_SKEW_TOL = 1e-9


def cross(a, b):
    """Cross product of two 3-vectors (much cheaper than np.cross for single vectors)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def hat(v):
    """Skew matrix such that hat(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(M, tol=_SKEW_TOL):
    """Inverse of hat. Raises NotSkew if M is not skew-symmetric within tol."""
    M = np.asarray(M, dtype=float)
    asym = np.linalg.norm(M + M.T)
    if asym > tol:
        raise NotSkew(f"matrix is not skew-symmetric (|M + M^T|_F = {asym:.3e})")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def _vee_unchecked(M):
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def attitude_error_psi(R, Rd):
    """Rotation error function tr(I - Rd^T R)/2, in [0, 2]."""
    return 0.5 * (3.0 - np.trace(Rd.T @ R))


def rotation_error(R, Rd):
    """e_R = (Rd^T R - R^T Rd)^vee / 2."""
    E = Rd.T @ R
    return 0.5 * _vee_unchecked(E - E.T)


def angular_velocity_error(Omega, R, Rd, Omega_d):
    """e_Omega = Omega - R^T Rd Omega_d."""
    return np.asarray(Omega, dtype=float) - R.T @ (Rd @ np.asarray(Omega_d, dtype=float))


def orthonormalize(R, tol=1e-6):
    """Closest rotation in Frobenius norm (polar factor via SVD)."""
    R = np.asarray(R, dtype=float)
    U, s, Vt = np.linalg.svd(R)
    if s[-1] < tol:
        raise Degenerate(f"near-singular matrix (smallest singular value {s[-1]:.3e})")
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        # reflection: flip the weakest direction
        U[:, -1] = -U[:, -1]
        Q = U @ Vt
    return Q


def expm_so3(w):
    """Rodrigues formula for exp(hat(w))."""
    w = np.asarray(w, dtype=float)
    th2 = float(w @ w)
    th = np.sqrt(th2)
    if th < 1e-4:
        # Taylor series, error O(th^6)
        a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        a = np.sin(th) / th
        b = (1.0 - np.cos(th)) / th2
    W = hat(w)
    return np.eye(3) + a * W + b * (W @ W)


def dexpinv(u, w):
    """Rate of u such that R0 exp(hat(u)) moves with body rate w.

    Solves d/dt [R0 exp(hat(u))] = R0 exp(hat(u)) hat(w) for du/dt.
    """
    th2 = float(u @ u)
    if th2 < 1e-8:
        c = 1.0 / 12.0 + th2 / 720.0
    else:
        th = np.sqrt(th2)
        c = (1.0 - 0.5 * th / np.tan(0.5 * th)) / th2
    uw = cross(u, w)
    return w + 0.5 * uw + c * cross(u, uw)


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng):
    """Uniformly distributed rotation from a numpy Generator."""
    from scipy.spatial.transform import Rotation
    return Rotation.random(random_state=rng).as_matrix()


def is_rotation(R, tol=1e-9):
    R = np.asarray(R)
    return (np.linalg.norm(R.T @ R - np.eye(3)) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol)
