"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected in the terminal
summary) before asserting.
"""
import time
from dataclasses import replace

import numpy as np
import pytest

from adaptquad import bounds as B, cli, sim, so3
from adaptquad.disturbances import ConstantWrench, InjectedSignal, MassMismatch, Scenario
from adaptquad.disturbances import sinusoid_injection
from adaptquad.dynamics import State, VehicleParams, b_matrices, step
from adaptquad.geometric import GainSet
from adaptquad.l1 import L1Params, lpf_update
from adaptquad.trajectories import Hover

P = VehicleParams()
LP = L1Params()
CI = B.CertificationInputs(GainSet(), P, LP)
TS_LIST = (0.005, 0.0025, 0.00125, 0.000625)


@pytest.fixture(scope="module")
def gain_cert():
    return B.search_certificate(CI, B.reference_force_bound(Hover(), P))


def test_criterion_1_estimation_error_scaling(verdict):
    t0 = time.perf_counter()
    sc = Scenario(terms=[sinusoid_injection(t_end=1e9)], duration=4.0)
    errs = cli.estimation_errors(sim.SimConfig(), sc, TS_LIST, 4.0)
    slope = cli.loglog_slope(TS_LIST, errs)
    dt = time.perf_counter() - t0
    ok = 0.85 <= slope <= 1.15 and dt < 60
    verdict(1, ok, f"slope {slope:.3f} (band 0.85..1.15), errors "
                   f"{', '.join(f'{e:.3g}' for e in errs)}, {dt:.1f} s")


def test_criterion_2_constant_sigma_bias(verdict):
    sigma = np.array([1.0, 0.01, -0.02, 0.005, 0.0, 0.0])
    sc = Scenario(terms=[InjectedSignal(bias=tuple(sigma))], duration=20.0)
    lg = sim.run_closed_loop(sim.SimConfig(scenario=sc))
    # at R = I thrust pairs with the vertical velocity channel, moments with the body rates
    expect = np.exp(LP.As_vec[2:6] * LP.Ts) * sigma[0:4]
    rel = np.abs(lg.sigma_hat[-1, 0:4] - expect) / np.abs(expect)
    verdict(2, bool(rel.max() <= 1e-6), f"max relative deviation from exp(A_s Ts) sigma "
                                        f"{rel.max():.2e} (limit 1e-6)")


def test_criterion_3_filter_contract(verdict):
    a = LP.lpf_pole()
    s = np.array([1.3, -0.4, 0.25, 0.08])
    u = np.zeros(4)
    gaps, outs = [], []
    k_end = int(np.ceil(5.0 / (LP.omega_vec.min() * LP.Ts))) + 2
    for _ in range(k_end):
        u = lpf_update(u, s, LP)
        outs.append(u.copy())
        gaps.append(u + s)
    gaps = np.array(gaps)
    # per channel, over its first 5/omega seconds (later gaps sink into round-off)
    c_err = 0.0
    for i, w in enumerate(LP.omega_vec):
        n = int(np.ceil(5.0 / (w * LP.Ts)))
        c_err = max(c_err, np.abs(gaps[1:n, i] / gaps[:n - 1, i] - a[i]).max())
    # steady-state gain from two consecutive samples, exact for a first-order recursion
    k = int(np.ceil(5.0 / (LP.omega_vec.min() * LP.Ts)))
    g_k, g_k1 = -outs[k - 1] / s, -outs[k] / s
    dc = (g_k1 - a * g_k) / (1 - a)
    dc_err = np.abs(dc - 1).max()
    ok = c_err <= 1e-12 and dc_err <= 1e-9
    verdict(3, ok, f"contraction error {c_err:.1e} (limit 1e-12), DC gain error {dc_err:.1e} "
                   f"after 5/omega (limit 1e-9)")


def test_criterion_4_nominal_exponential_stability(verdict, gain_cert):
    cert = gain_cert
    gains = replace(GainSet(), c1=cert.c1, c2=cert.c2)
    cfg = sim.SimConfig(gains=gains, duration=10.0, l1_enabled=False, init_dp=(0.0, 0.0, 0.1))
    x0 = sim.initial_state(cfg)
    roa = B.region_of_attraction_check(x0.R, np.eye(3), np.zeros(3), cert.psi1, gains.KR, P.J)
    lg = sim.run_closed_loop(cfg)
    upticks = np.diff(lg.V) / lg.V[:-1]
    worst = float(upticks.max())
    env = 1.2 * np.sqrt(cert.gamma_hi / cert.gamma_lo) * lg.d[0] * np.exp(-cert.beta * lg.t / 2)
    env_ok = bool(np.all(lg.d <= env))
    ok = cert.gains_feasible and roa and worst <= 1e-6 and env_ok
    verdict(4, ok, f"beta {cert.beta:.3g}, largest relative V step {worst:.2e} (limit 1e-6), "
                   f"envelope held {env_ok}, d(10 s)/d(0) {lg.d[-1] / lg.d[0]:.3g}")


FAMILIES = {
    "constant wrench": lambda s: Scenario(
        "wrench", [ConstantWrench(M0=(0.01 * s, -0.01 * s, 0.002 * s))], 30.0),
    "injected sinusoid": lambda s: Scenario("sinusoid", [sinusoid_injection(0.6 * s, 30.0)], 30.0),
    "mass mismatch": lambda s: Scenario("mass", [MassMismatch(P.m * (1 + 0.3 * s))], 30.0),
}


def test_criterion_5_tube_containment(verdict, gain_cert):
    cache = {}
    details, ok = [], True
    for name, make in FAMILIES.items():
        scale, cert, _ = cli.largest_certifiable_scale(make, CI, gain_cert, Hover(), GainSet(), P,
                                                      30.0, cache=cache)
        if scale is None or not cert.feasible:
            ok = False
            details.append(f"{name}: no certifiable amplitude")
            continue
        lg = sim.run_closed_loop(sim.SimConfig(scenario=make(scale)))
        in_tube = sim.tube_check(lg, cert.rho)
        late = sim.tube_check(lg, cert.mu, t_from=1.0)
        ok = ok and in_tube["ok"] and late["ok"]
        details.append(f"{name}: scale {scale:.2g}, rho {cert.rho:.3g}, mu {cert.mu:.3g}, "
                       f"max d {in_tube['max_d']:.2g}")
    verdict(5, ok, "; ".join(details))


def test_criterion_6_compensation_trend(verdict):
    sc = Scenario(terms=[sinusoid_injection()], duration=16.0)
    on = sim.run_closed_loop(sim.SimConfig(scenario=sc))
    off = sim.run_closed_loop(sim.SimConfig(scenario=sc, l1_enabled=False))
    r_on, r_off = sim.rmse(on), sim.rmse(off)
    m = (on.t >= 4.0) & (on.t <= 16.0)
    t, y = on.t[m], -on.uad[m, 0]
    A = np.column_stack([np.sin(2 * np.pi * t), np.cos(2 * np.pi * t),
                         np.sin(np.pi * t), np.cos(np.pi * t), np.ones_like(t)])
    c, *_ = np.linalg.lstsq(A, y, rcond=None)
    amp_err = [abs(np.hypot(c[0], c[1]) - 0.6) / 0.6, abs(np.hypot(c[2], c[3]) - 0.6) / 0.6]
    ok = r_on <= 0.5 * r_off and max(amp_err) < 0.1
    verdict(6, ok, f"RMSE on {r_on:.4f} vs off {r_off:.4f} (ratio {r_on / r_off:.2f}), "
                   f"amplitude error 1 Hz {amp_err[0]:.1%}, 0.5 Hz {amp_err[1]:.1%}")


def test_criterion_7_benchmark_trend(verdict):
    speeds = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]
    weights = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    t0 = time.perf_counter()
    rows = sim.benchmark_sweep(speeds, weights, base_cfg=sim.SimConfig(duration=10.0),
                               window=(5.0, 10.0))
    dt = time.perf_counter() - t0
    table = {(r["speed"], r["weight"], r["mode"]): r["rmse"] for r in rows}
    ratios, inversions = [], []
    for s in speeds:
        on = np.array([table[(s, w, "l1")] for w in weights])
        off = np.array([table[(s, w, "baseline")] for w in weights])
        ratios.append(on.max() / on.min() if np.all(np.isfinite(on)) else np.inf)
        inversions.append(int(np.sum(np.diff(off) < 0)) if np.all(np.isfinite(off)) else 99)
    ok = len(rows) == 72 and max(ratios) <= 2 and max(inversions) <= 1 and dt < 600
    verdict(7, ok, f"worst L1-on max/min {max(ratios):.2f} (limit 2), L1-off inversions per "
                   f"speed {inversions}, {dt:.0f} s")


def test_criterion_8_numerical_hygiene(verdict):
    x0 = State(np.zeros(3), np.array([0.3, 0, -0.2]), so3.rot_x(0.2), np.array([2.0, -1.0, 3.0]))
    u = np.array([7.0, 0.002, -0.001, 0.0005])

    def run(dt, T=1.0):
        x = x0
        for _ in range(int(round(T / dt))):
            x = step(x, u, dt, P)
        return x

    ref = run(1e-4)

    def err(x):
        return np.linalg.norm(np.concatenate([x.p - ref.p, x.v - ref.v, (x.R - ref.R).ravel(),
                                              x.Omega - ref.Omega]))

    e = [err(run(dt)) for dt in (0.02, 0.01, 0.005)]
    orders = [np.log2(e[0] / e[1]), np.log2(e[1] / e[2])]
    order_ok = all(abs(o - 4) <= 0.3 for o in orders)

    x = State(np.zeros(3), np.zeros(3), np.eye(3), np.array([1.0, 0.5, -0.8]))
    uf = np.array([P.m * P.g, 0.0, 0.0, 0.0])
    e0 = x.Omega @ (P.Jvec * x.Omega)
    drift = 0.0
    for _ in range(int(round(25.0 / 0.0025))):
        x = step(x, uf, 0.0025, P)
        drift = max(drift, abs(x.Omega @ (P.Jvec * x.Omega) - e0) / e0)

    rng = np.random.default_rng(0)
    inv_err = 0.0
    for _ in range(1000):
        Bm = b_matrices(so3.random_rotation(rng), P)
        inv_err = max(inv_err, np.abs(Bm["B_bar_inv"] @ Bm["B_bar"] - np.eye(6)).max())

    cfg = sim.SimConfig(duration=1.0, scenario=Scenario(terms=[sinusoid_injection()]),
                        init_random=0.02, seed=11)
    same = sim.run_closed_loop(cfg).csv_text() == sim.run_closed_loop(cfg).csv_text()

    ok = order_ok and drift <= 1e-9 and inv_err <= 1e-10 and same
    verdict(8, ok, f"order {orders[0]:.2f}/{orders[1]:.2f}, energy drift {drift:.1e}, "
                   f"B_bar inverse error {inv_err:.1e}, identical CSV {same}")


def test_criterion_9_certification_sanity(verdict, gain_cert):
    bad = B.search_certificate(CI, P.m * P.g, pinned={"c1": 1e6, "c2": 0.01})
    ok = (gain_cert.gains_feasible and all(gain_cert.pd.values()) and gain_cert.beta > 0
          and bad.verdict == "Infeasible" and bad.first_failed == "M11")
    verdict(9, ok, f"searched c1 {gain_cert.c1:.3g}, c2 {gain_cert.c2:.3g}, psi1 "
                   f"{gain_cert.psi1:.2g}, H {gain_cert.H:.3g}, beta {gain_cert.beta:.3g}; "
                   f"c1 = 1e6 gives {bad.verdict} at {bad.first_failed}")
