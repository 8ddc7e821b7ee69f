"""Quadrotor rigid-body model in north-east-down frames.

Translational motion is written in the inertial frame, rotational motion in
the body frame. Thrust acts along -b3, so hover needs f = m g at R = I.

Control inputs are 4-vectors u = [f, Mx, My, Mz]. Uncertainties are
6-vectors sigma = [sigma_m (4 matched), sigma_um (2 unmatched)].
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import so3
from .errors import NonFinite

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

# motor order: front-right, back-left, front-left, back-right
SPIN_SIGNS = np.array([1.0, 1.0, -1.0, -1.0])


@dataclass(frozen=True)
class VehicleParams:
    m: float = 0.62
    J: tuple = (3.0e-3, 1.8e-3, 3.2e-3)     # principal inertia, kg m^2
    g: float = 9.81
    arm: float = 0.11                        # motor-to-center, half of the diagonal
    yaw_coeff: float = 0.01                  # reaction torque per newton of thrust, m
    f_max: float = 8.0                       # per-motor thrust limit, N
    saturate: bool = False

    @property
    def Jmat(self):
        return np.diag(self.J)

    @property
    def Jvec(self):
        return np.asarray(self.J, dtype=float)

    def motor_positions(self):
        a = self.arm / np.sqrt(2.0)
        return np.array([[a, a], [-a, -a], [a, -a], [-a, a]])

    def allocation(self):
        """4x4 map from motor thrusts to [f, Mx, My, Mz]."""
        xy = self.motor_positions()
        return np.vstack([np.ones(4), -xy[:, 1], xy[:, 0], self.yaw_coeff * SPIN_SIGNS])


@dataclass
class State:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    Omega: np.ndarray

    @classmethod
    def hover(cls, p=(0.0, 0.0, 0.0)):
        return cls(np.array(p, dtype=float), np.zeros(3), np.eye(3), np.zeros(3))

    def copy(self):
        return State(self.p.copy(), self.v.copy(), self.R.copy(), self.Omega.copy())

    @property
    def z(self):
        """Partial state [v, Omega]."""
        return np.concatenate([self.v, self.Omega])

    def as_vector(self):
        return np.concatenate([self.p, self.v, self.R.ravel(), self.Omega])

    def is_finite(self):
        return bool(np.all(np.isfinite(self.as_vector())))


@dataclass
class StateDot:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    Omega: np.ndarray


def _accels(x, u, sigma, params):
    m = params.m
    Jv = params.Jvec
    R, W = x.R, x.Omega
    f = u[0]
    M = np.asarray(u[1:4], dtype=float)
    dv = params.g * E3 - (f / m) * R[:, 2]
    if sigma is not None:
        dv = dv + (R[:, 0] * sigma[4] + R[:, 1] * sigma[5] - R[:, 2] * sigma[0]) / m
        M = M + sigma[1:4]
    dW = (M - so3.cross(W, Jv * W)) / Jv
    return dv, dW


def nominal_derivative(x, u, params):
    dv, dW = _accels(x, u, None, params)
    return StateDot(x.v.copy(), dv, x.R @ so3.hat(x.Omega), dW)


def uncertain_derivative(x, u, sigma, params):
    dv, dW = _accels(x, u, np.asarray(sigma, dtype=float), params)
    return StateDot(x.v.copy(), dv, x.R @ so3.hat(x.Omega), dW)


def drift_z(z, params):
    """Uncontrolled part of the partial dynamics, f(z) = [g e3, -J^-1 Omega x J Omega]."""
    Jv = params.Jvec
    W = z[3:6]
    return np.concatenate([params.g * E3, -so3.cross(W, Jv * W) / Jv])


def b_matrices(R, params):
    """Input matrices of the partial dynamics and the closed-form inverse of B_bar."""
    m = params.m
    Jv = params.Jvec
    B = np.zeros((6, 4))
    B[0:3, 0] = -R[:, 2] / m
    B[3:6, 1:4] = np.diag(1.0 / Jv)
    Bp = np.zeros((6, 2))
    Bp[0:3, 0] = R[:, 0] / m
    Bp[0:3, 1] = R[:, 1] / m
    Bb = np.hstack([B, Bp])
    Binv = np.zeros((6, 6))
    Binv[0, 0:3] = -m * R[:, 2]
    Binv[4, 0:3] = m * R[:, 0]
    Binv[5, 0:3] = m * R[:, 1]
    Binv[1:4, 3:6] = np.diag(Jv)
    return {"B": B, "B_perp": Bp, "B_bar": Bb, "B_bar_inv": Binv}


def apply_b_bar_inv(R, y, params):
    """B_bar(R)^-1 y without forming the matrix."""
    yv = R.T @ y[0:3] * params.m
    return np.array([-yv[2], *(params.Jvec * y[3:6]), yv[0], yv[1]])


def motor_mixing(u, params):
    """Motor thrusts for a wrench and whether any of them hit the limits.

    Clamping is only applied when params.saturate is set; the flag is
    reported either way.
    """
    A = params.allocation()
    T = np.linalg.solve(A, np.asarray(u, dtype=float))
    saturated = bool(np.any(T < 0.0) or np.any(T > params.f_max))
    if params.saturate:
        T = np.clip(T, 0.0, params.f_max)
    return T, saturated


def wrench_from_thrusts(T, params):
    return params.allocation() @ np.asarray(T, dtype=float)


def _check(*arrs):
    # a sum is non-finite iff some entry is non-finite (or overflows, also fatal)
    if not np.isfinite(sum(float(a.sum()) for a in arrs)):
        raise NonFinite("non-finite state derivative")


def step_coupled(x, aux, u, dt, params, provider=None, t=0.0):
    """One RK4 step with a Lie-group attitude update (RKMK4).

    provider(t, x, u, aux) -> (sigma or None, aux_dot) supplies the
    uncertainty and the derivative of an auxiliary state vector (e.g. a
    slung payload). aux may be an empty array. Returns (x_next, aux_next).
    """
    u = np.asarray(u, dtype=float)
    aux = np.asarray(aux, dtype=float)
    R0 = x.R

    def rates(ts, xs, auxs):
        if provider is None:
            sig, daux = None, np.zeros_like(auxs)
        else:
            sig, daux = provider(ts, xs, u, auxs)
        dv, dW = _accels(xs, u, None if sig is None else np.asarray(sig, dtype=float), params)
        _check(dv, dW, daux)
        return dv, dW, np.asarray(daux, dtype=float)

    cs = (0.0, 0.5, 0.5, 1.0)
    ks_p, ks_v, ks_W, ks_th, ks_a = [], [], [], [], []
    for i, c in enumerate(cs):
        if i == 0:
            xs, auxs, us = x, aux, np.zeros(3)
        else:
            h = c * dt
            us = h * ks_th[-1]
            xs = State(x.p + h * ks_p[-1], x.v + h * ks_v[-1], R0 @ so3.expm_so3(us),
                       x.Omega + h * ks_W[-1])
            auxs = aux + h * ks_a[-1]
        dv, dW, da = rates(t + c * dt, xs, auxs)
        ks_p.append(xs.v)
        ks_v.append(dv)
        ks_W.append(dW)
        ks_a.append(da)
        ks_th.append(xs.Omega if i == 0 else so3.dexpinv(us, xs.Omega))

    def comb(k):
        return (dt / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])

    R1 = so3.orthonormalize(R0 @ so3.expm_so3(comb(ks_th)))
    x1 = State(x.p + comb(ks_p), x.v + comb(ks_v), R1, x.Omega + comb(ks_W))
    aux1 = aux + comb(ks_a)
    if not (x1.is_finite() and np.all(np.isfinite(aux1))):
        raise NonFinite("integration produced non-finite state")
    return x1, aux1


def step(x, u, dt, params, sigma_provider=None, t=0.0):
    """Advance the vehicle by dt under a zero-order-held input u.

    sigma_provider(t, x) -> 6-vector or None gives the uncertainty.
    """
    prov = None
    if sigma_provider is not None:
        def prov(ts, xs, us, a):
            return sigma_provider(ts, xs), a * 0.0
    x1, _ = step_coupled(x, np.zeros(0), u, dt, params, prov, t)
    return x1


def with_mass(params, m):
    return replace(params, m=float(m))
