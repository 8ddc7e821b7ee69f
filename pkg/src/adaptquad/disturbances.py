"""Uncertainty generators sigma(t, x, u) and scenario composition.

All terms return 6-vectors [sigma_m1, sigma_M (3), sigma_um (2)] in the
convention of dynamics.uncertain_derivative: an inertial force F acting on
the vehicle maps to sigma_m1 = -F.Re3, sigma_um = (F.Re1, F.Re2), so the
perturbed acceleration is exactly F/m.
"""
from dataclasses import dataclass, field

import numpy as np

from . import so3
from .dynamics import motor_mixing, wrench_from_thrusts

ZERO = np.zeros(6)


def force_to_sigma(F, R):
    """Resolve an inertial force on the body axes as an uncertainty vector."""
    Fb = R.T @ np.asarray(F, dtype=float)
    return np.array([-Fb[2], 0.0, 0.0, 0.0, Fb[0], Fb[1]])


def sigma_to_force(sigma, R):
    return R @ np.array([sigma[4], sigma[5], -sigma[0]])


def _in_window(t, window):
    if window is None:
        return True
    return window[0] <= t <= window[1]


class Term:
    """Base class. Stateless terms keep aux_size = 0."""
    aux_size = 0

    def aux_init(self, x, params):
        return np.zeros(0)

    def aux_dot(self, t, x, u, aux, params):
        return np.zeros(0)

    def project_aux(self, x, aux):
        return aux

    def evaluate(self, t, x, u, params, aux=None):
        raise NotImplementedError


@dataclass
class InjectedSignal(Term):
    """Sum of sines plus bias per channel, active on a time window.

    components: iterable of (channel, amplitude, angular frequency, phase).
    """
    components: tuple = ()
    bias: tuple = (0.0,) * 6
    window: tuple = None

    def evaluate(self, t, x=None, u=None, params=None, aux=None):
        out = np.array(self.bias, dtype=float)
        if not _in_window(t, self.window):
            return np.zeros(6)
        for ch, amp, w, ph in self.components:
            out[int(ch)] += amp * np.sin(w * t + ph)
        return out

    def peak(self):
        """Upper bound on |sigma| per channel."""
        pk = np.abs(np.array(self.bias, dtype=float))
        for ch, amp, w, ph in self.components:
            pk[int(ch)] += abs(amp)
        return pk

    def time_lipschitz(self):
        lt = np.zeros(6)
        for ch, amp, w, ph in self.components:
            lt[int(ch)] += abs(amp * w)
        return lt


def injected_sinusoid(t, amplitude=0.6, t_end=16.0):
    """0.6 sin(2 pi t) + 0.6 sin(pi t) on the thrust channel for t in [0, t_end]."""
    return sinusoid_injection(amplitude, t_end).evaluate(t)


def sinusoid_injection(amplitude=0.6, t_end=16.0):
    return InjectedSignal(components=((0, amplitude, 2 * np.pi, 0.0), (0, amplitude, np.pi, 0.0)),
                          window=(0.0, t_end))


@dataclass
class ConstantWrench(Term):
    """Inertial force F0 (N) and body moment M0 (N m)."""
    F0: tuple = (0.0, 0.0, 0.0)
    M0: tuple = (0.0, 0.0, 0.0)
    window: tuple = None

    def evaluate(self, t, x, u=None, params=None, aux=None):
        if not _in_window(t, self.window):
            return np.zeros(6)
        s = force_to_sigma(self.F0, x.R)
        s[1:4] = self.M0
        return s


@dataclass
class MassMismatch(Term):
    """True mass differs from the controller's model mass."""
    m_real: float = 0.62

    def evaluate(self, t, x, u, params, aux=None):
        s = np.zeros(6)
        s[0] = (params.m - self.m_real) * u[0] / self.m_real
        return s


def thrust_scale_effect(scales, u_cmd, params):
    """Wrench error when each motor produces scale_i times its commanded thrust."""
    T, _ = motor_mixing(u_cmd, params)
    real = wrench_from_thrusts(np.asarray(scales, dtype=float) * T, params)
    s = np.zeros(6)
    s[0:4] = real - np.asarray(u_cmd, dtype=float)
    return s


@dataclass
class ThrustScale(Term):
    scales: tuple = (1.0, 1.0, 1.0, 1.0)
    window: tuple = None

    def evaluate(self, t, x, u, params, aux=None):
        if not _in_window(t, self.window):
            return np.zeros(6)
        return thrust_scale_effect(self.scales, u, params)


@dataclass
class VoltageDrop(Term):
    """Cell voltage decays exponentially; thrust scales with (V / V_nominal)^2."""
    v_start: float = 4.2
    v_end: float = 3.2
    tau: float = 10.0
    v_nominal: float = 4.2

    def voltage(self, t):
        return self.v_end + (self.v_start - self.v_end) * np.exp(-max(t, 0.0) / self.tau)

    def scale(self, t):
        return (self.voltage(t) / self.v_nominal) ** 2

    def evaluate(self, t, x, u, params, aux=None):
        return thrust_scale_effect([self.scale(t)] * 4, u, params)


@dataclass
class LinearDrag(Term):
    """Aerodynamic drag F = -k (v - wind), inertial frame."""
    coeff: float = 0.1
    wind: tuple = (0.0, 0.0, 0.0)

    def evaluate(self, t, x, u=None, params=None, aux=None):
        return force_to_sigma(-self.coeff * (x.v - np.asarray(self.wind, dtype=float)), x.R)


@dataclass
class GroundEffect(Term):
    """Extra lift kappa f exp(-(altitude - surface)/decay) near a surface."""
    surface: float = 0.0
    gain: float = 0.1
    decay: float = 0.1

    def evaluate(self, t, x, u, params, aux=None):
        alt = -x.p[2]
        s = np.zeros(6)
        s[0] = self.gain * u[0] * np.exp(-max(alt - self.surface, 0.0) / self.decay)
        return s


@dataclass
class SlungPayload(Term):
    """Point mass on a rigid massless cord attached at body offset `offset`.

    aux = [r, r_dot]: payload position relative to the attachment point, in
    the inertial frame. The cord only pulls (tension clipped at zero). The
    attachment point acceleration is approximated by the centre-of-mass
    acceleration.
    """
    mass: float = 0.1
    length: float = 0.4
    offset: tuple = (0.0, 0.0, 0.0)
    initial_angle: float = 0.0     # swing about the inertial x-axis at t = 0
    aux_size = 6

    def aux_init(self, x, params):
        a = self.initial_angle
        r = self.length * np.array([0.0, -np.sin(a), np.cos(a)])
        return np.concatenate([r, np.zeros(3)])

    def tension(self, x, u, aux, params):
        if self.mass <= 0:
            return 0.0, np.zeros(3)
        m, mL, L = params.m, self.mass, self.length
        r, rd = aux[0:3], aux[3:6]
        n = r / np.linalg.norm(r)
        a0 = params.g * np.array([0.0, 0.0, 1.0]) - (u[0] / m) * x.R[:, 2]
        vt = rd - n * (n @ rd)
        T = (m * mL / (m + mL)) * (n @ (params.g * np.array([0.0, 0.0, 1.0]) - a0) + vt @ vt / L)
        return max(T, 0.0), n

    def evaluate(self, t, x, u, params, aux=None):
        if self.mass <= 0 or aux is None:
            return np.zeros(6)
        T, n = self.tension(x, u, aux, params)
        F = T * n
        s = force_to_sigma(F, x.R)
        s[1:4] = so3.cross(np.asarray(self.offset, dtype=float), x.R.T @ F)
        return s

    def aux_dot(self, t, x, u, aux, params):
        if self.mass <= 0:
            return np.zeros(6)
        m, mL = params.m, self.mass
        T, n = self.tension(x, u, aux, params)
        g3 = params.g * np.array([0.0, 0.0, 1.0])
        aQ = g3 - (u[0] / m) * x.R[:, 2] + T * n / m
        aP = g3 - (T / mL) * n
        return np.concatenate([aux[3:6], aP - aQ])

    def project_aux(self, x, aux):
        r, rd = aux[0:3], aux[3:6]
        n = r / np.linalg.norm(r)
        return np.concatenate([self.length * n, rd - n * (n @ rd)])


@dataclass
class Scenario:
    name: str = "nominal"
    terms: list = field(default_factory=list)
    duration: float = 10.0
    trajectory: str = "hover"
    l1_schedule: tuple = ()     # sorted (time, enabled) switches

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        ts = [s[0] for s in self.l1_schedule]
        if ts != sorted(ts):
            raise ValueError("L1 schedule times must be sorted")

    @property
    def aux_size(self):
        return sum(t.aux_size for t in self.terms)

    def aux_init(self, x, params):
        parts = [t.aux_init(x, params) for t in self.terms]
        return np.concatenate(parts) if parts else np.zeros(0)

    def _slices(self):
        i = 0
        for term in self.terms:
            yield term, slice(i, i + term.aux_size)
            i += term.aux_size

    def project_aux(self, x, aux):
        out = np.array(aux, dtype=float)
        for term, sl in self._slices():
            if term.aux_size:
                out[sl] = term.project_aux(x, aux[sl])
        return out

    def l1_enabled(self, t, default=True):
        on = default
        for ts, flag in self.l1_schedule:
            if t >= ts:
                on = bool(flag)
        return on


def evaluate(term, t, x, u_cmd, params, aux=None):
    return term.evaluate(t, x, u_cmd, params, aux)


def compose(scenario, t, x, u_cmd, params, aux=None):
    """Sum of all term uncertainties, plus the stacked auxiliary derivative."""
    sigma = np.zeros(6)
    daux = np.zeros(scenario.aux_size)
    for term, sl in scenario._slices():
        a = None if aux is None or not term.aux_size else aux[sl]
        sigma = sigma + term.evaluate(t, x, u_cmd, params, a)
        if term.aux_size and aux is not None:
            daux[sl] = term.aux_dot(t, x, u_cmd, a, params)
    return sigma, daux


def slung_payload_coupling(term, aux, x, u_cmd, params):
    """Uncertainty induced by the payload and the payload state derivative."""
    return term.evaluate(0.0, x, u_cmd, params, aux), term.aux_dot(0.0, x, u_cmd, aux, params)
