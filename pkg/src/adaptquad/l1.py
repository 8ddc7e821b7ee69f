"""L1 adaptive augmentation: state predictor, piecewise-constant adaptation
and first-order low-pass compensation of the matched estimate.

Everything runs in discrete time at the sampling period Ts. The predictor is
advanced with forward Euler, the adaptation law uses closed-form exponentials
of the diagonal A_s.
"""
from dataclasses import dataclass, field

import numpy as np

from .dynamics import apply_b_bar_inv, drift_z
from .errors import NonFinite


@dataclass(frozen=True)
class L1Params:
    As: tuple = (-5.0, -5.0, -5.0, -10.0, -10.0, -10.0)
    Ts: float = 0.0025
    omega: tuple = (30.0, 15.0, 15.0, 5.0)   # thrust, roll, pitch, yaw
    clamp_thrust: float = None               # None -> 4 m g
    clamp_moment: float = 1.0

    def __post_init__(self):
        if any(a >= 0 for a in self.As):
            raise ValueError("A_s must have strictly negative diagonal")
        if self.Ts <= 0:
            raise ValueError("Ts must be positive")
        if any(w <= 0 for w in self.omega):
            raise ValueError("filter bandwidths must be positive")

    @property
    def As_vec(self):
        return np.asarray(self.As, dtype=float)

    @property
    def omega_vec(self):
        return np.asarray(self.omega, dtype=float)

    def adaptation_gain(self):
        """Diagonal of Phi^-1 exp(A_s Ts), Phi = A_s^-1 (exp(A_s Ts) - I)."""
        a = self.As_vec
        e = np.exp(a * self.Ts)
        return a * e / np.expm1(a * self.Ts)

    def lpf_pole(self):
        return np.exp(-self.omega_vec * self.Ts)

    def clamps(self, params):
        ct = 4.0 * params.m * params.g if self.clamp_thrust is None else self.clamp_thrust
        cm = self.clamp_moment
        return np.array([ct, cm, cm, cm, ct, ct])


@dataclass
class L1State:
    z_hat: np.ndarray = field(default_factory=lambda: np.zeros(6))
    sigma_hat: np.ndarray = field(default_factory=lambda: np.zeros(6))
    u_ad: np.ndarray = field(default_factory=lambda: np.zeros(4))
    z_tilde: np.ndarray = field(default_factory=lambda: np.zeros(6))
    z_prev: np.ndarray = None
    R_prev: np.ndarray = None
    ub_prev: np.ndarray = None
    initialized: bool = False
    clamp_count: int = 0

    def copy(self):
        def c(a):
            return None if a is None else np.array(a, copy=True)
        return L1State(c(self.z_hat), c(self.sigma_hat), c(self.u_ad), c(self.z_tilde),
                       c(self.z_prev), c(self.R_prev), c(self.ub_prev),
                       self.initialized, self.clamp_count)


def predictor_step(l1, z, R, u_b, params, l1p):
    """Euler update of the predictor from sample k-1 to k.

    z, R and u_b are the measurements and baseline input at k-1; the
    predictor state, estimate and u_ad at k-1 are read from l1.
    """
    m, Jv = params.m, params.Jvec
    sh = l1.sigma_hat
    um = np.asarray(u_b, dtype=float) + l1.u_ad + sh[0:4]
    z_tilde = l1.z_hat - z
    rate = drift_z(z, params) + l1p.As_vec * z_tilde
    rate[0:3] += (-R[:, 2] * um[0] + R[:, 0] * sh[4] + R[:, 1] * sh[5]) / m
    rate[3:6] += um[1:4] / Jv
    return l1.z_hat + l1p.Ts * rate


def adaptation_update(z_tilde, R, l1p, params, clamp=False):
    """sigma_hat = -B_bar(R)^-1 Phi^-1 exp(A_s Ts) z_tilde.

    With clamp=True the estimate is also limited elementwise and the second
    return value tells whether the limit was active.
    """
    mu = l1p.adaptation_gain() * np.asarray(z_tilde, dtype=float)
    sh = -apply_b_bar_inv(R, mu, params)
    if not clamp:
        return sh
    lim = l1p.clamps(params)
    clipped = np.clip(sh, -lim, lim)
    return clipped, bool(np.any(clipped != sh))


def lpf_update(u_ad_prev, sigma_hat_m, l1p):
    """u_ad(k) = e^{-w Ts} u_ad(k-1) - (1 - e^{-w Ts}) sigma_hat_m(k), per channel."""
    a = l1p.lpf_pole()
    return a * np.asarray(u_ad_prev, dtype=float) - (1.0 - a) * np.asarray(sigma_hat_m, dtype=float)


def l1_step(l1, z, R, u_b, params, l1p):
    """Run one sampling period of the adaptive loop.

    Mutates and returns l1 together with the new u_ad. The first call only
    latches the predictor onto the measurement, so z_tilde = 0 there.
    """
    z = np.asarray(z, dtype=float)
    if not l1.initialized:
        l1.z_hat = z.copy()
        l1.z_tilde = np.zeros(6)
        l1.sigma_hat = np.zeros(6)
        l1.u_ad = lpf_update(l1.u_ad, l1.sigma_hat[0:4], l1p)
        l1.initialized = True
    else:
        l1.z_hat = predictor_step(l1, l1.z_prev, l1.R_prev, l1.ub_prev, params, l1p)
        l1.z_tilde = l1.z_hat - z
        l1.sigma_hat, clipped = adaptation_update(l1.z_tilde, R, l1p, params, clamp=True)
        l1.clamp_count += int(clipped)
        l1.u_ad = lpf_update(l1.u_ad, l1.sigma_hat[0:4], l1p)
    if not (np.all(np.isfinite(l1.u_ad)) and np.all(np.isfinite(l1.z_hat))):
        raise NonFinite("adaptive loop produced non-finite values")
    l1.z_prev = z.copy()
    l1.R_prev = np.array(R, dtype=float)
    l1.ub_prev = np.array(u_b, dtype=float)
    return l1.u_ad.copy(), l1


def reset(l1):
    """Switch-off behaviour: drop the estimate and compensation."""
    return L1State()
