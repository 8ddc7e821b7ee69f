"""Reference generators returning position, its derivatives through snap, and yaw."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrajectoryPoint:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    s: np.ndarray
    psi: float = 0.0
    dpsi: float = 0.0
    ddpsi: float = 0.0


def _sin_derivs(amp, k, phase, t):
    # n-th derivative of amp*sin(k t + phase) is amp k^n sin(k t + phase + n pi/2)
    return [amp * k ** n * np.sin(k * t + phase + n * np.pi / 2) for n in range(5)]


class Hover:
    def __init__(self, p0=(0.0, 0.0, -1.0), psi0=0.0):
        self.p0 = np.array(p0, dtype=float)
        self.psi0 = float(psi0)

    def __call__(self, t):
        z = np.zeros(3)
        return TrajectoryPoint(self.p0.copy(), z, z, z, z, self.psi0)


class Circle:
    """Horizontal circle at fixed altitude (NED, so z = -altitude)."""

    def __init__(self, radius=1.0, speed=2.5, altitude=1.0, center=(0.0, 0.0), psi0=0.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if speed < 0:
            raise ValueError("speed must be non-negative")
        self.radius = float(radius)
        self.speed = float(speed)
        self.altitude = float(altitude)
        self.center = np.array(center, dtype=float)
        self.psi0 = float(psi0)
        self.w = self.speed / self.radius

    def __call__(self, t):
        r, w = self.radius, self.w
        xs = _sin_derivs(r, w, np.pi / 2, t)   # r cos(wt)
        ys = _sin_derivs(r, w, 0.0, t)         # r sin(wt)
        d = [np.array([xs[n], ys[n], 0.0]) for n in range(5)]
        d[0] = d[0] + np.array([self.center[0], self.center[1], -self.altitude])
        return TrajectoryPoint(*d, psi=self.psi0)


class Figure8:
    """x = 2 sin(vt/2.51), y = 1.5 sin(2vt/2.51), z = 0.2 sin(vt/2.51) - 1 (NED)."""

    def __init__(self, v_max=1.0, psi0=0.0):
        if v_max < 0:
            raise ValueError("v_max must be non-negative")
        self.v_max = float(v_max)
        self.psi0 = float(psi0)

    def __call__(self, t):
        k = self.v_max / 2.51
        xs = _sin_derivs(2.0, k, 0.0, t)
        ys = _sin_derivs(1.5, 2 * k, 0.0, t)
        zs = _sin_derivs(0.2, k, 0.0, t)
        d = [np.array([xs[n], ys[n], zs[n]]) for n in range(5)]
        d[0] = d[0] + np.array([0.0, 0.0, -1.0])
        return TrajectoryPoint(*d, psi=self.psi0)


def trajectory_hover(p0=(0.0, 0.0, -1.0), psi0=0.0):
    return Hover(p0, psi0)


def trajectory_circle(radius=1.0, speed=2.5, altitude=1.0, **kw):
    return Circle(radius, speed, altitude, **kw)


def trajectory_figure8(v_max=1.0, **kw):
    return Figure8(v_max, **kw)


def make_trajectory(kind, **kw):
    kinds = {"hover": Hover, "circle": Circle, "figure8": Figure8}
    if kind not in kinds:
        raise ValueError(f"unknown trajectory kind {kind!r}")
    return kinds[kind](**kw)
