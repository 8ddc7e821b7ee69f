"""Closed-loop simulation, metrics, and the benchmark sweep.

Per tick: baseline control, L1 update (when enabled), uncertainty applied
inside the integrator, plant step. Controller and plant share the sampling
period Ts; the plant may substep.
"""
import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import so3
from .bounds import lyapunov_value
from .disturbances import Scenario, compose
from .dynamics import State, VehicleParams, motor_mixing, step_coupled, wrench_from_thrusts
from .errors import Diverged, EmptyWindow
from .geometric import GainSet, baseline_control, desired_attitude
from .l1 import L1Params, L1State, l1_step
from .trajectories import Circle, Figure8, Hover, make_trajectory

CSV_GROUPS = (("t", 1), ("p", 3), ("v", 3), ("R", 9), ("Omega", 3), ("pd", 3), ("ub", 4),
              ("uad", 4), ("sigma", 6), ("sigma_hat", 6), ("ztilde", 6), ("d", 1), ("V", 1))


def csv_header():
    cols = []
    for name, n in CSV_GROUPS:
        cols += [name] if n == 1 else [f"{name}{i}" for i in range(n)]
    return cols


@dataclass
class SimConfig:
    params: VehicleParams = field(default_factory=VehicleParams)
    gains: GainSet = field(default_factory=GainSet)
    l1p: L1Params = field(default_factory=L1Params)
    scenario: Scenario = field(default_factory=Scenario)
    trajectory: object = field(default_factory=Hover)
    duration: float = None          # None -> scenario.duration
    substeps: int = 1
    seed: int = 0
    l1_enabled: bool = True
    init_dp: tuple = (0.0, 0.0, 0.0)
    init_dv: tuple = (0.0, 0.0, 0.0)
    init_dtheta: tuple = (0.0, 0.0, 0.0)     # body rotation vector applied to R_d(0)
    init_dOmega: tuple = (0.0, 0.0, 0.0)
    init_random: float = 0.0                 # std of an extra seeded perturbation
    abort_radius: float = 10.0

    def __post_init__(self):
        if not 1 <= int(self.substeps) <= 10:
            raise ValueError("substeps must be in 1..10")
        if self.horizon <= 0:
            raise ValueError("duration must be positive")

    @property
    def horizon(self):
        return self.scenario.duration if self.duration is None else self.duration


@dataclass
class SimLog:
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    pd: np.ndarray
    ub: np.ndarray
    uad: np.ndarray
    sigma: np.ndarray
    sigma_hat: np.ndarray
    ztilde: np.ndarray
    d: np.ndarray
    V: np.ndarray
    e_p: np.ndarray
    saturation_count: int = 0
    clamp_count: int = 0
    diverged: bool = False

    def summary(self):
        return {"rmse": rmse(self), "max_d": float(self.d.max()) if len(self.d) else 0.0,
                "saturation_count": self.saturation_count, "clamp_count": self.clamp_count,
                "diverged": self.diverged, "ticks": len(self.t)}

    def rows(self):
        return np.hstack([self.t[:, None], self.p, self.v, self.R, self.Omega, self.pd, self.ub,
                          self.uad, self.sigma, self.sigma_hat, self.ztilde, self.d[:, None],
                          self.V[:, None]])

    def to_csv(self, path_or_buf):
        """Fixed-header CSV, one row per tick, shortest repr that round-trips."""
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(csv_header())
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])
        finally:
            if own:
                fh.close()

    def csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def initial_state(cfg):
    """Exact tracking of the reference at t = 0 plus the configured perturbation."""
    p = cfg.params
    pt = cfg.trajectory(0.0)
    F = -p.m * p.g * np.array([0.0, 0.0, 1.0]) + p.m * pt.a
    Rd, Wd, _ = desired_attitude(F, pt, m=p.m)
    rng = np.random.default_rng(cfg.seed)
    extra = cfg.init_random * rng.normal(size=12) if cfg.init_random > 0 else np.zeros(12)
    R = Rd @ so3.expm_so3(np.asarray(cfg.init_dtheta, dtype=float) + extra[6:9])
    return State(pt.p + np.asarray(cfg.init_dp, dtype=float) + extra[0:3],
                 pt.v + np.asarray(cfg.init_dv, dtype=float) + extra[3:6],
                 R, R.T @ Rd @ Wd + np.asarray(cfg.init_dOmega, dtype=float) + extra[9:12])


def run_closed_loop(cfg, raise_on_divergence=True):
    """Simulate the configured scenario and return the per-tick log.

    On divergence the partial log is attached to the Diverged exception (or
    returned with diverged=True when raise_on_divergence is False).
    """
    params, gains, l1p, sc = cfg.params, cfg.gains, cfg.l1p, cfg.scenario
    Ts = l1p.Ts
    n = int(round(cfg.horizon / Ts))
    h = Ts / int(cfg.substeps)
    x = initial_state(cfg)
    aux = sc.aux_init(x, params)
    l1s = L1State()
    cols = {k: [] for k in ("t", "p", "v", "R", "Omega", "pd", "ub", "uad", "sigma",
                            "sigma_hat", "ztilde", "d", "V", "e_p")}
    sat = 0
    diverged = False
    was_on = None

    def provider(ts, xs, us, a):
        return compose(sc, ts, xs, us, params, a)

    for k in range(n + 1):
        t = k * Ts
        pt = cfg.trajectory(t)
        bo = baseline_control(x, pt, gains, params)
        on = sc.l1_enabled(t, cfg.l1_enabled)
        if on:
            if was_on is False:
                l1s = L1State()
            u_ad, l1s = l1_step(l1s, x.z, x.R, bo.u, params, l1p)
        else:
            u_ad = np.zeros(4)
            l1s = L1State()
        was_on = on
        u = bo.u + u_ad
        T, saturated = motor_mixing(u, params)
        sat += int(saturated)
        if params.saturate:
            u = wrench_from_thrusts(T, params)
        sigma, _ = compose(sc, t, x, u, params, aux)
        xd = (pt.p, pt.v, bo.Rd, bo.Omega_d)
        d = float(np.linalg.norm(np.concatenate([bo.e_p, bo.e_v, bo.e_R, bo.e_Omega])))
        V = lyapunov_value(bo.e_p, bo.e_v, bo.e_R, bo.e_Omega, x.R, bo.Rd, gains, params)
        for key, val in (("t", t), ("p", x.p), ("v", x.v), ("R", x.R.ravel()),
                         ("Omega", x.Omega), ("pd", pt.p), ("ub", bo.u), ("uad", u_ad),
                         ("sigma", sigma), ("sigma_hat", l1s.sigma_hat if on else np.zeros(6)),
                         ("ztilde", l1s.z_tilde if on else np.zeros(6)), ("d", d), ("V", V),
                         ("e_p", bo.e_p)):
            cols[key].append(np.array(val, dtype=float))
        if d > cfg.abort_radius or not np.isfinite(d):
            diverged = True
            break
        if k == n:
            break
        for i in range(int(cfg.substeps)):
            x, aux = step_coupled(x, aux, u, h, params, provider, t + i * h)
            if aux.size:
                aux = sc.project_aux(x, aux)

    log = SimLog(**{k: np.array(v) for k, v in cols.items()}, saturation_count=sat,
                 clamp_count=l1s.clamp_count, diverged=diverged)
    if diverged and raise_on_divergence:
        err = Diverged(f"tracking distance {log.d[-1]:.3g} exceeded abort radius "
                       f"{cfg.abort_radius} at t = {log.t[-1]:.4f} s", log.t[-1], log.d[-1])
        err.log = log
        raise err
    return log


def rmse(log, window=None):
    """Root-mean-square position error over ticks with t in [t0, t1]."""
    if window is None:
        mask = np.ones(len(log.t), dtype=bool)
    else:
        mask = (log.t >= window[0] - 1e-12) & (log.t <= window[1] + 1e-12)
    if not mask.any():
        raise EmptyWindow(f"no samples in window {window}")
    e = np.linalg.norm(log.e_p[mask], axis=1)
    return float(np.sqrt(np.mean(e ** 2)))


def tube_check(log, rho, t_from=0.0):
    """Whether every sample (from t_from on) has tracking distance <= rho."""
    mask = log.t >= t_from - 1e-12
    d = log.d[mask]
    bad = np.nonzero(d > rho)[0]
    return {"ok": bool(bad.size == 0), "max_d": float(d.max()) if d.size else 0.0,
            "first_violation_t": float(log.t[mask][bad[0]]) if bad.size else None}


# ---------------------------------------------------------------- benchmark

def default_benchmark_terms():
    """Weight-independent background: drag plus a slow gust on the body-xy forces."""
    from .disturbances import InjectedSignal, LinearDrag
    gust = InjectedSignal(components=((4, 0.15, 0.7, 0.0), (5, 0.15, 1.9, 1.0),
                                      (4, 0.08, 1.9, 0.4), (5, 0.08, 0.7, 2.0)))
    return (LinearDrag(0.15), gust)


def benchmark_scenario(weight, duration, base_terms=(), kind="added", cord=0.4, params=None):
    """Scenario with a weight either rigidly added at the centre of mass or slung on a cord."""
    from .disturbances import MassMismatch, SlungPayload
    terms = list(base_terms)
    if weight > 0:
        if kind == "added":
            m = (params or VehicleParams()).m
            terms.append(MassMismatch(m_real=m + weight))
        elif kind == "slung":
            terms.append(SlungPayload(mass=weight, length=cord))
        else:
            raise ValueError(f"unknown weight kind {kind!r}")
    return Scenario(name=f"weight_{weight:g}", terms=terms, duration=duration,
                    trajectory="circle")


def _run_cell(args):
    speed, weight, mode, base_cfg, window, base_terms, radius, kind = args
    traj = Circle(radius=radius, speed=speed, altitude=1.0)
    sc = benchmark_scenario(weight, base_cfg.horizon, base_terms, kind, params=base_cfg.params)
    cfg = replace(base_cfg, scenario=sc, trajectory=traj, l1_enabled=(mode == "l1"))
    try:
        log = run_closed_loop(cfg)
        return {"speed": speed, "weight": weight, "mode": mode,
                "rmse": rmse(log, window), "crashed": False}
    except Diverged:
        return {"speed": speed, "weight": weight, "mode": mode, "rmse": float("nan"),
                "crashed": True}


def benchmark_sweep(speeds, weights, modes=("l1", "baseline"), base_cfg=None, window=None,
                    base_terms=None, radius=1.0, kind="added", workers=1):
    """One closed-loop run per (speed, weight, mode) cell on a circle.

    Weights are in kg, added at the centre of mass or slung (kind). The
    background terms default to default_benchmark_terms(). Crashed cells are kept with
    crashed=True and a NaN RMSE. Result order follows the grid order
    regardless of the number of workers.
    """
    if not speeds or not weights or not modes:
        raise ValueError("grid must be non-empty")
    base_cfg = base_cfg or SimConfig(duration=10.0)
    if window is None:
        window = (0.5 * base_cfg.horizon, base_cfg.horizon)
    if base_terms is None:
        base_terms = default_benchmark_terms()
    cells = [(s, w, m, base_cfg, window, tuple(base_terms), radius, kind)
             for s in speeds for w in weights for m in modes]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_run_cell, cells))
    return [_run_cell(c) for c in cells]


def sweep_table_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["speed", "weight", "mode", "rmse", "crashed"])
    for r in rows:
        w.writerow([repr(float(r["speed"])), repr(float(r["weight"])), r["mode"],
                    repr(float(r["rmse"])), int(r["crashed"])])
    return buf.getvalue()
