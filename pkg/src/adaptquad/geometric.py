"""Geometric tracking controller on SE(3).

Thrust comes from projecting the desired force on the body z-axis, the
moment from attitude and rate errors with gyroscopic feedforward.
"""
from dataclasses import dataclass

import numpy as np

from . import so3
from .dynamics import E3
from .errors import DegenerateForce

_FMIN = 1e-6


@dataclass(frozen=True)
class GainSet:
    Kp: tuple = (14.0, 15.0, 15.0)
    Kv: tuple = (1.5, 0.9, 1.1)
    KR: tuple = (0.55, 0.35, 0.15)
    KOmega: tuple = (0.035, 0.03, 0.004)
    c1: float = 1.0
    c2: float = 1.0

    def arr(self, name):
        return np.asarray(getattr(self, name), dtype=float)


def desired_force(e_p, e_v, a_d, gains, params):
    return (-gains.arr("Kp") * e_p - gains.arr("Kv") * e_v
            - params.m * params.g * E3 + params.m * np.asarray(a_d, dtype=float))


def thrust_command(F_d, R):
    return -float(np.dot(F_d, R[:, 2]))


def _unit_with_derivs(a, da, dda):
    """n = a/|a| and its first two time derivatives."""
    r = np.linalg.norm(a)
    n = a / r
    dr = n @ da
    dn = (da - n * dr) / r
    ddr = dn @ da + n @ dda
    ddn = (dda - ddr * n - 2.0 * dr * dn) / r
    return n, dn, ddn


def desired_attitude(F_d, traj, dF_d=None, ddF_d=None, m=None):
    """Desired rotation, body rate and body angular acceleration.

    b3 points along -F_d, b1 is the heading (cos psi, sin psi, 0) made
    orthogonal to b3, b2 = b3 x b1. When dF_d / ddF_d are omitted they are
    taken from the reference alone (m * jerk, m * snap), which is exact on a
    perfectly tracked trajectory.
    """
    F_d = np.asarray(F_d, dtype=float)
    if np.linalg.norm(F_d) < _FMIN:
        raise DegenerateForce(f"|F_d| = {np.linalg.norm(F_d):.3e} N is below {_FMIN} N")
    if dF_d is None or ddF_d is None:
        if m is None:
            raise ValueError("mass required for feedforward force derivatives")
        dF_d = m * traj.j if dF_d is None else dF_d
        ddF_d = m * traj.s if ddF_d is None else ddF_d
    b3, db3, ddb3 = _unit_with_derivs(-F_d, -np.asarray(dF_d), -np.asarray(ddF_d))

    c, s = np.cos(traj.psi), np.sin(traj.psi)
    h = np.array([c, s, 0.0])
    dh = traj.dpsi * np.array([-s, c, 0.0])
    ddh = traj.ddpsi * np.array([-s, c, 0.0]) - traj.dpsi ** 2 * h

    k = so3.cross(b3, h)
    if np.linalg.norm(k) < _FMIN:
        raise DegenerateForce("thrust direction parallel to heading vector")
    dk = so3.cross(db3, h) + so3.cross(b3, dh)
    ddk = so3.cross(ddb3, h) + 2.0 * so3.cross(db3, dh) + so3.cross(b3, ddh)
    b2, db2, ddb2 = _unit_with_derivs(k, dk, ddk)

    b1 = so3.cross(b2, b3)
    db1 = so3.cross(db2, b3) + so3.cross(b2, db3)
    ddb1 = so3.cross(ddb2, b3) + 2.0 * so3.cross(db2, db3) + so3.cross(b2, ddb3)

    Rd = np.column_stack([b1, b2, b3])
    dRd = np.column_stack([db1, db2, db3])
    ddRd = np.column_stack([ddb1, ddb2, ddb3])
    W = Rd.T @ dRd
    Wd = dRd.T @ dRd + Rd.T @ ddRd
    Omega_d = 0.5 * so3._vee_unchecked(W - W.T)
    dOmega_d = 0.5 * so3._vee_unchecked(Wd - Wd.T)
    return Rd, Omega_d, dOmega_d


def moment_command(R, Omega, Rd, Omega_d, dOmega_d, gains, params):
    Jv = params.Jvec
    e_R = so3.rotation_error(R, Rd)
    e_W = so3.angular_velocity_error(Omega, R, Rd, Omega_d)
    RtRd = R.T @ Rd
    ff = so3.cross(Omega, RtRd @ Omega_d) - RtRd @ dOmega_d
    return (-gains.arr("KR") * e_R - gains.arr("KOmega") * e_W
            + so3.cross(Omega, Jv * Omega) - Jv * ff)


@dataclass
class BaselineOutput:
    u: np.ndarray
    F_d: np.ndarray
    Rd: np.ndarray
    Omega_d: np.ndarray
    dOmega_d: np.ndarray
    e_p: np.ndarray
    e_v: np.ndarray
    e_R: np.ndarray
    e_Omega: np.ndarray


def baseline_control(x, traj, gains, params, feedforward_only=False):
    """Thrust and moment for state x tracking reference point traj.

    The desired-force derivatives include the feedback terms, with the
    velocity-error rate taken from the nominal model.
    """
    m, g = params.m, params.g
    Kp, Kv = gains.arr("Kp"), gains.arr("Kv")
    e_p = x.p - traj.p
    e_v = x.v - traj.v
    F_d = desired_force(e_p, e_v, traj.a, gains, params)
    f = thrust_command(F_d, x.R)
    if feedforward_only:
        dF, ddF = m * traj.j, m * traj.s
    else:
        b3 = x.R[:, 2]
        db3 = x.R @ so3.cross(x.Omega, E3)
        acc = g * E3 - (f / m) * b3
        e_a = acc - traj.a
        dF = -Kp * e_v - Kv * e_a + m * traj.j
        df = -(dF @ b3) - (F_d @ db3)
        e_j = -(df * b3 + f * db3) / m - traj.j
        ddF = -Kp * e_a - Kv * e_j + m * traj.s
    Rd, Wd, dWd = desired_attitude(F_d, traj, dF, ddF)
    M = moment_command(x.R, x.Omega, Rd, Wd, dWd, gains, params)
    return BaselineOutput(np.array([f, *M]), F_d, Rd, Wd, dWd, e_p, e_v,
                          so3.rotation_error(x.R, Rd),
                          so3.angular_velocity_error(x.Omega, x.R, Rd, Wd))
