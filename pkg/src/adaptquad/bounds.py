"""Certification of the geometric + L1 closed loop.

Computes the Lyapunov matrices and decay rate of the baseline controller,
the uncertainty-dependent constants, the tube radius rho, the sampling-time
and bandwidth conditions, the ultimate bound mu, and tube-sampled
calibration of the uncertainty bounds.

Diagonal gain matrices are reduced to scalars conservatively: the smallest
eigenvalue where a gain stabilizes, the largest where it destabilizes.
"""
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import so3
from .dynamics import State
from .errors import DegenerateForce, PoleCollision, UnboundedSample
from .geometric import GainSet, baseline_control

PD_TOL = 1e-12
PD_ORDER = ("M11", "M21", "M12", "M22", "W1", "W2", "W")


@dataclass
class CertificationInputs:
    gains: GainSet
    params: object
    l1p: object
    psi1: float = 0.1
    H: float = 6.5
    delta_sigma: float = 0.0
    delta_sigma_m: float = 0.0
    delta_sigma_um: float = 0.0
    L_sigma_t: float = 0.0
    L_sigma_x: float = 0.0
    L_sigma_mt: float = 0.0
    L_sigma_mx: float = 0.0
    omega_max: float = 0.0       # bound on |Omega| over the tube, rad/s
    L_B: float = None            # None -> omega_max / m
    delta_f: float = None        # None -> analytic from omega_max
    delta_ub: float = 0.0
    delta_uhat: float = None     # None -> norm of the estimator clamp
    c3: float = None             # None -> analytic
    c4: float = None
    d0: float = 0.0
    V0: float = 0.0
    eps: float = 1e-3            # slack added to the tube radius
    eps_v: float = 1e-3          # slack in the unmatched-uncertainty condition
    t1: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and f.name not in ("psi1",) and v < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if not 0.0 < self.psi1 < 1.0:
            raise ValueError("psi1 must lie in (0, 1)")


@dataclass
class BoundCertificate:
    matrices: dict
    alpha: float
    beta: float
    gamma_lo: float
    gamma_hi: float
    pd: dict
    c1: float = None
    c2: float = None
    psi1: float = None
    H: float = None
    phi1: float = None
    zeta1: float = None
    zeta2: float = None
    zeta3: float = None
    zeta4: float = None
    rho: float = None
    V0: float = None
    Ts_max: float = None
    mu: float = None
    c3: float = None
    c4: float = None
    cond32: bool = None
    cond33: bool = None
    assumption2: bool = None
    H_covers_reference: bool = None
    extra: dict = field(default_factory=dict)

    @property
    def gains_feasible(self):
        return all(self.pd.values()) and self.beta > 0

    @property
    def first_failed(self):
        for k in PD_ORDER:
            if not self.pd[k]:
                return k
        for k in ("cond32", "cond33", "assumption2"):
            if getattr(self, k) is False:
                return k
        if self.beta <= 0:
            return "beta"
        return None

    @property
    def feasible(self):
        return self.first_failed is None

    @property
    def verdict(self):
        return "Feasible" if self.feasible else "Infeasible"


def _gain_scalars(gains):
    d = {}
    for name in ("Kp", "Kv", "KR", "KOmega"):
        a = gains.arr(name)
        d[name] = (float(a.min()), float(a.max()))
    return d


def b_norms(params):
    """Spectral norms of the input matrices. They do not depend on R."""
    m = params.m
    Jv = params.Jvec
    nb = max(1.0 / m, 1.0 / Jv.min())
    return {"B": nb, "B_bar": nb, "B_bar_inv": max(m, Jv.max()), "B_F": nb, "B_bar_F": nb}


def lyapunov_matrices(ci, c1=None, c2=None):
    """W1, W12, W2, W and M11..M22 for the baseline controller."""
    g = _gain_scalars(ci.gains)
    c1 = ci.gains.c1 if c1 is None else c1
    c2 = ci.gains.c2 if c2 is None else c2
    m = ci.params.m
    Jv = ci.params.Jvec
    lmJ, lMJ = Jv.min(), Jv.max()
    psi1, H = ci.psi1, ci.H
    a = np.sqrt(psi1 * (2.0 - psi1))
    kp_m, kp_M = g["Kp"]
    kv_m, kv_M = g["Kv"]
    kr_m, kr_M = g["KR"]
    ko_m, ko_M = g["KOmega"]
    off1 = -c1 * kv_M / (2 * m) * (1 + a) - kp_M * a / 2
    W1 = np.array([[c1 * kp_m / m * (1 - a), off1],
                   [off1, kv_m * (1 - a) - c1]])
    W12 = np.array([[c1 * H / m, 0.0], [H, 0.0]])
    off2 = -c2 * ko_M / (2 * lmJ)
    W2 = np.array([[c2 * kr_m / lMJ, off2], [off2, ko_m - c2]])
    W = np.block([[W1, -W12 / 2], [-W12.T / 2, W2]])
    M11 = 0.5 * np.array([[kp_m, -c1], [-c1, m]])
    M12 = 0.5 * np.array([[kp_M, c1], [c1, m]])
    M21 = 0.5 * np.array([[kr_m, -c2], [-c2, lmJ]])
    M22 = 0.5 * np.array([[2 * kr_M / (2 - psi1), c2], [c2, lMJ]])
    return {"W1": W1, "W12": W12, "W2": W2, "W": W,
            "M11": M11, "M12": M12, "M21": M21, "M22": M22, "alpha": a}


def certify_gains(ci, c1=None, c2=None):
    """Positive-definiteness flags, decay rate and Lyapunov sandwich constants."""
    mats = lyapunov_matrices(ci, c1, c2)
    ev = {k: np.linalg.eigvalsh(mats[k]) for k in PD_ORDER}
    pd = {k: bool(ev[k][0] > PD_TOL) for k in PD_ORDER}
    lam_hi = max(ev["M12"][-1], ev["M22"][-1])
    beta = float(ev["W"][0] / lam_hi)
    gl = float(min(ev["M11"][0], ev["M21"][0]))
    gu = float(max(ev["M12"][-1], ev["M22"][-1]))
    alpha = mats.pop("alpha")
    return BoundCertificate(matrices=mats, alpha=float(alpha), beta=beta, gamma_lo=gl,
                            gamma_hi=gu, pd=pd,
                            c1=ci.gains.c1 if c1 is None else c1,
                            c2=ci.gains.c2 if c2 is None else c2, psi1=ci.psi1, H=ci.H)


def lyapunov_value(e_p, e_v, e_R, e_Omega, R, Rd, gains, params):
    """V = 1/2 e_p.Kp e_p + m/2 |e_v|^2 + c1 e_p.e_v + 1/2 e_W.J e_W + k_R Psi + c2 e_R.e_W.

    Kp and J enter as quadratic forms; the attitude potential uses the
    smallest entry of K_R, consistent with the lower sandwich matrix.
    """
    Kp = gains.arr("Kp")
    kr = float(gains.arr("KR").min())
    e_p, e_v, e_R, e_Omega = (np.asarray(a, dtype=float) for a in (e_p, e_v, e_R, e_Omega))
    return float(0.5 * e_p @ (Kp * e_p) + 0.5 * params.m * e_v @ e_v + gains.c1 * e_p @ e_v
                 + 0.5 * e_Omega @ (params.Jvec * e_Omega)
                 + kr * so3.attitude_error_psi(R, Rd) + gains.c2 * e_R @ e_Omega)


def error_tuple(x, xd):
    p_d, v_d, R_d, W_d = xd
    return (x.p - p_d, x.v - v_d, so3.rotation_error(x.R, R_d),
            so3.angular_velocity_error(x.Omega, x.R, R_d, W_d))


def tracking_distance(x, xd):
    """Euclidean norm of the stacked errors (e_p, e_v, e_R, e_Omega)."""
    return float(np.linalg.norm(np.concatenate(error_tuple(x, xd))))


def c3_c4(ci, c1=None, c2=None):
    """Analytic constants with |P1| <= c3 d and |P2| <= c4 d."""
    c1 = ci.gains.c1 if c1 is None else c1
    c2 = ci.gains.c2 if c2 is None else c2
    m, lmJ = ci.params.m, ci.params.Jvec.min()
    c4 = np.sqrt((c1 / m) ** 2 + 1.0)
    c3 = max(c4, np.sqrt(1.0 + (c2 / lmJ) ** 2))
    return (ci.c3 if ci.c3 is not None else float(c3),
            ci.c4 if ci.c4 is not None else float(c4))


def _derived_bounds(ci):
    p = ci.params
    Jv = p.Jvec
    norms = b_norms(p)
    L_B = ci.omega_max / p.m if ci.L_B is None else ci.L_B
    if ci.delta_f is None:
        gyro = (Jv.max() - Jv.min()) / (2 * Jv.min()) * ci.omega_max ** 2
        delta_f = float(np.hypot(p.g, gyro))
    else:
        delta_f = ci.delta_f
    if ci.delta_uhat is None:
        delta_uhat = float(np.linalg.norm(ci.l1p.clamps(p)))
    else:
        delta_uhat = ci.delta_uhat
    return norms, L_B, delta_f, delta_uhat


def zeta_constants(ci, beta, omega=None):
    """phi1 and zeta1..zeta4.

    With per-channel filter bandwidths, zeta1 is evaluated at the slowest
    channel and zeta3 at the fastest, which is the conservative choice for
    each. The A_s term uses the largest |diagonal entry|.
    """
    norms, L_B, delta_f, delta_uhat = _derived_bounds(ci)
    w = np.atleast_1d(ci.l1p.omega_vec if omega is None else np.asarray(omega, dtype=float))
    w1, w3 = float(w.min()), float(w.max())
    if abs(w1 - beta) < 1e-9:
        raise PoleCollision(f"filter bandwidth {w1} coincides with decay rate {beta}")
    nB, nBi, nBF = norms["B_bar"], norms["B_bar_inv"], norms["B_F"]
    phi1 = delta_f + nB * ci.delta_sigma + nBF * (ci.delta_ub + delta_uhat)
    z1 = ci.delta_sigma_m / abs(beta - w1) + (ci.L_sigma_mt + ci.L_sigma_mx * phi1) / (beta * w1)
    lam_as = float(np.abs(ci.l1p.As_vec).max())
    s6 = np.sqrt(6.0)
    z2 = (2 * s6 * nB * nBi * (phi1 * ci.L_sigma_x + ci.L_sigma_t)
          + 2 * s6 * nBi * L_B * delta_uhat
          + s6 * nBi * (2 * L_B + lam_as * nB) * ci.delta_sigma)
    z3 = ci.delta_sigma * w3
    return {"phi1": float(phi1), "zeta1": float(z1), "zeta2": float(z2), "zeta3": float(z3),
            "zeta4": float(z2 + z3)}


def tube_radius(d0, gamma_lo, gamma_hi, eps):
    if gamma_lo <= 0:
        raise ValueError("gamma_lo must be positive")
    return d0 * np.sqrt(gamma_hi / gamma_lo) + eps


def feasibility_conditions(ci, rho, zetas, V0, gamma_lo, c3, c4, Ts=None):
    """Bandwidth condition, sampling-time limit and the unmatched-uncertainty condition."""
    lhs = gamma_lo * rho ** 2
    slack = lhs - c3 * rho * zetas["zeta1"] - c4 * rho * ci.delta_sigma_um - V0
    cond32 = bool(slack > 0)
    Ts_max = slack / zetas["zeta4"] if zetas["zeta4"] > 0 else (np.inf if slack > 0 else 0.0)
    Ts = ci.l1p.Ts if Ts is None else Ts
    cond33 = bool(cond32 and Ts <= Ts_max)
    a2 = bool(ci.delta_sigma_um <= (lhs - V0 - ci.eps_v) / (c4 * rho))
    return {"cond32": cond32, "Ts_max": float(max(Ts_max, 0.0)) if np.isfinite(Ts_max) else Ts_max,
            "cond33": cond33, "assumption2": a2}


def ultimate_bound(omega, Ts, t1, ci, rho, V0, cert=None):
    """mu = sqrt((e^{-beta t1} V0 + c3 rho zeta1 + zeta4 Ts + c4 rho Delta_um) / gamma_lo)."""
    if cert is None:
        cert = certify_gains(ci)
    if cert.beta <= 0:
        raise ValueError("ultimate bound needs a positive decay rate")
    z = zeta_constants(ci, cert.beta, omega)
    c3, c4 = c3_c4(ci, cert.c1, cert.c2)
    num = (np.exp(-cert.beta * t1) * V0 + c3 * rho * z["zeta1"] + z["zeta4"] * Ts
           + c4 * rho * ci.delta_sigma_um)
    return float(np.sqrt(num / cert.gamma_lo))


def region_of_attraction_check(R0, Rd0, e_Omega0, psi1, KR, J):
    """Psi(R0, Rd0) < psi1 < 1 and |e_W0|^2 < 2/lambda_M(J) k_R (psi1 - Psi)."""
    psi0 = so3.attitude_error_psi(R0, Rd0)
    if not (psi0 < psi1 < 1.0):
        return False
    kr = float(np.min(np.diag(KR) if np.ndim(KR) == 2 else KR))
    lMJ = float(np.max(np.diag(J) if np.ndim(J) == 2 else J))
    e = np.asarray(e_Omega0, dtype=float)
    return bool(e @ e < 2.0 / lMJ * kr * (psi1 - psi0))


def roa_min_psi1(R0, Rd0, e_Omega0, KR, J):
    """Smallest psi1 admitted by the region-of-attraction test (exclusive)."""
    psi0 = so3.attitude_error_psi(R0, Rd0)
    kr = float(np.min(KR))
    lMJ = float(np.max(J))
    e = np.asarray(e_Omega0, dtype=float)
    return psi0 + (e @ e) * lMJ / (2.0 * kr)


def estimation_error_bound(zeta2, Ts, delta_sigma, t):
    if t < 0:
        raise ValueError("t must be non-negative")
    return delta_sigma if t < Ts else zeta2 * Ts


def certify(ci, cert=None, omega=None):
    """Full certificate: gain conditions plus tube, sampling and ultimate-bound checks."""
    if cert is None:
        cert = certify_gains(ci)
    if not cert.gains_feasible:
        return cert
    c3, c4 = c3_c4(ci, cert.c1, cert.c2)
    rho = tube_radius(ci.d0, cert.gamma_lo, cert.gamma_hi, ci.eps)
    z = zeta_constants(ci, cert.beta, omega)
    fc = feasibility_conditions(ci, rho, z, ci.V0, cert.gamma_lo, c3, c4)
    cert = replace(cert, **z, rho=float(rho), V0=ci.V0, Ts_max=fc["Ts_max"], c3=c3, c4=c4,
                   cond32=fc["cond32"], cond33=fc["cond33"], assumption2=fc["assumption2"])
    cert.mu = ultimate_bound(omega, ci.l1p.Ts, ci.t1, ci, rho, ci.V0, cert)
    return cert


# ---------------------------------------------------------------- search

def reference_force_bound(traj, params, t_end=10.0, n=2001):
    """max |-m g e3 + m a_d| over a sampled horizon."""
    ts = np.linspace(0.0, t_end, n)
    g3 = np.array([0.0, 0.0, params.g])
    return float(max(np.linalg.norm(params.m * (traj(t).a - g3)) for t in ts))


PSI_MARGIN = 1e-4


def _best_beta(ci, psi_lo, n_grid=20):
    """Maximize the decay rate over (c1, c2, psi1) for fixed H.

    psi1 is kept at least PSI_MARGIN above psi_lo so that the region of
    attraction does not collapse.
    """
    from scipy.optimize import minimize

    g = _gain_scalars(ci.gains)
    m = ci.params.m
    lmJ = ci.params.Jvec.min()
    c1_hi = np.sqrt(g["Kp"][0] * m)
    c2_hi = min(np.sqrt(g["KR"][0] * lmJ), g["KOmega"][0])
    psi_lo = psi_lo + PSI_MARGIN * (1.0 - psi_lo)
    psi_cands = psi_lo + (1.0 - psi_lo) * np.array([1e-6, 1e-3, 1e-2, 0.05, 0.2])

    def beta_of(c1, c2, psi1):
        if not (psi_lo <= psi1 < 1.0) or c1 <= 0 or c2 <= 0:
            return -np.inf, None
        cert = certify_gains(replace(ci, psi1=float(psi1)), c1, c2)
        return (cert.beta if cert.gains_feasible else -np.inf), cert

    best = (-np.inf, None)
    for psi1 in psi_cands:
        for c1 in np.geomspace(c1_hi * 1e-5, c1_hi, n_grid):
            for c2 in np.geomspace(c2_hi * 1e-5, c2_hi, n_grid):
                b, _ = beta_of(c1, c2, psi1)
                if b > best[0]:
                    best = (b, (c1, c2, psi1))
    if best[1] is None:
        return None

    def obj(q):
        c1, c2 = np.exp(q[0]), np.exp(q[1])
        psi1 = psi_lo + (1.0 - psi_lo) / (1.0 + np.exp(-q[2]))
        b, _ = beta_of(c1, c2, psi1)
        return -b if np.isfinite(b) else 1e6

    c1, c2, psi1 = best[1]
    s = (psi1 - psi_lo) / (1.0 - psi_lo)
    q0 = np.array([np.log(c1), np.log(c2), np.log(s / (1 - s))])
    res = minimize(obj, q0, method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 2000})
    if res.fun < -best[0]:
        q = res.x
        c1, c2 = float(np.exp(q[0])), float(np.exp(q[1]))
        psi1 = float(psi_lo + (1.0 - psi_lo) / (1.0 + np.exp(-q[2])))
    b, cert = beta_of(c1, c2, psi1)
    return cert


def _best_beta_fixed_psi(ci, n_grid=40):
    g = _gain_scalars(ci.gains)
    m = ci.params.m
    lmJ = ci.params.Jvec.min()
    c1_hi = np.sqrt(g["Kp"][0] * m)
    c2_hi = min(np.sqrt(g["KR"][0] * lmJ), g["KOmega"][0])
    best = None
    for c1 in np.geomspace(c1_hi * 1e-5, c1_hi, n_grid):
        for c2 in np.geomspace(c2_hi * 1e-5, c2_hi, n_grid):
            cert = certify_gains(ci, c1, c2)
            if cert.gains_feasible and (best is None or cert.beta > best.beta):
                best = cert
    return best


def search_certificate(ci, H_ref, psi_min=0.0, H_steps=24, pinned=None):
    """Pick (c1, c2, psi1, H) for a feasible gain certificate.

    H is taken as the largest value on a quarter-decade grid descending from
    H_ref for which some (c1, c2, psi1) is feasible; then the decay rate is
    maximized over (c1, c2, psi1). Entries of `pinned` (keys c1, c2, psi1, H)
    are held fixed. Returns the certificate; it carries the flag
    H_covers_reference telling whether the chosen H exceeds H_ref.
    """
    pinned = dict(pinned or {})
    psi_lo = max(psi_min, 0.0)
    if "c1" in pinned and "c2" in pinned:
        ci2 = replace(ci, psi1=pinned.get("psi1", ci.psi1), H=pinned.get("H", ci.H))
        cert = certify_gains(ci2, pinned["c1"], pinned["c2"])
        cert.H_covers_reference = bool(cert.H > H_ref)
        return cert
    H_grid = [pinned["H"]] if "H" in pinned else [H_ref * (1 + 1e-6) * 10 ** (-k / 4)
                                                   for k in range(H_steps)]
    last = None
    for H in H_grid:
        ci2 = replace(ci, H=float(H))
        if "psi1" in pinned:
            cert = _best_beta_fixed_psi(replace(ci2, psi1=pinned["psi1"]))
        else:
            cert = _best_beta(ci2, psi_lo)
        if cert is not None:
            cert.H_covers_reference = bool(H > H_ref)
            cert.extra["H_ref"] = H_ref
            return cert
        last = ci2
    # nothing feasible; report the plain evaluation at the smallest H
    cert = certify_gains(last)
    cert.H_covers_reference = False
    cert.extra["H_ref"] = H_ref
    return cert


# ---------------------------------------------------------------- calibration

@dataclass
class TubeSamples:
    """States drawn from the tube around a reference, with their baseline inputs."""
    rho: float
    ts: np.ndarray
    states: list
    ub: list
    pairs: list           # (i, x_perturbed, ub_perturbed, state distance)
    omega_max: float
    grid: str


def _random_ball(rng, n, r):
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    return v * r * rng.uniform() ** (1.0 / n)


def sample_tube(traj, gains, params, rho, duration, n=600, seed=0, pair_step=1e-6):
    """Draw states x with d(x, x_d(t)) <= rho at random t in [0, duration]."""
    rng = np.random.default_rng(seed)
    ts, states, ubs, pairs = [], [], [], []
    wmax = 0.0
    tries = 0
    while len(states) < n:
        tries += 1
        if tries > 50 * n:
            raise UnboundedSample("could not draw enough admissible tube states")
        t = float(rng.uniform(0.0, duration))
        pt = traj(t)
        F = -params.m * params.g * np.array([0, 0, 1.0]) + params.m * pt.a
        from .geometric import desired_attitude
        Rd, Wd, _ = desired_attitude(F, pt, m=params.m)
        # split the radius between the error components
        w = rng.dirichlet(np.ones(4))
        r = rho * np.sqrt(w) * rng.uniform() ** 0.25
        theta = _random_ball(rng, 3, min(r[2], np.pi) * 0.999)
        R = Rd @ so3.expm_so3(theta)
        eW = _random_ball(rng, 3, r[3])
        x = State(pt.p + _random_ball(rng, 3, r[0]), pt.v + _random_ball(rng, 3, r[1]), R,
                  eW + R.T @ Rd @ Wd)
        try:
            ub = baseline_control(x, pt, gains, params).u
        except DegenerateForce:
            continue
        # perturbed partner for Lipschitz estimates
        h = pair_step * max(1.0, rho)
        dp, dv, dth, dW = (_random_ball(rng, 3, h) for _ in range(4))
        x2 = State(x.p + dp, x.v + dv, x.R @ so3.expm_so3(dth), x.Omega + dW)
        try:
            ub2 = baseline_control(x2, pt, gains, params).u
        except DegenerateForce:
            continue
        dist = float(np.linalg.norm(np.concatenate([dp, dv, dth, dW])))
        ts.append(t)
        states.append(x)
        ubs.append(ub)
        pairs.append((len(states) - 1, x2, ub2, dist))
        wmax = max(wmax, float(np.linalg.norm(x.Omega)))
    grid = f"{n} uniform-in-time tube samples, radius {rho:.6g}, horizon {duration:g} s, seed {seed}"
    wd_max = 0.0
    for t in np.linspace(0.0, duration, 201):
        pt = traj(t)
        F = -params.m * params.g * np.array([0, 0, 1.0]) + params.m * pt.a
        from .geometric import desired_attitude
        wd_max = max(wd_max, float(np.linalg.norm(desired_attitude(F, pt, m=params.m)[1])))
    return TubeSamples(rho, np.array(ts), states, ubs, pairs, max(wmax, wd_max + rho), grid)


def uncertainty_bound_calibration(scenario, samples, params, margin=1.2, dt_pair=1e-4,
                                  u_extra=None):
    """Empirical uncertainty bounds over tube samples, inflated by `margin`.

    scenario must contain only stateless terms. u_extra, if given, is added
    to the baseline input when evaluating input-dependent terms (it stands in
    for the compensation, which is not a function of the state).
    """
    from .disturbances import compose
    if scenario.aux_size:
        raise ValueError("calibration does not support terms with internal state")
    ue = np.zeros(4) if u_extra is None else np.asarray(u_extra, dtype=float)
    ds = dsm = dsum = lt = lx = lmt = lmx = 0.0
    ub_max = 0.0
    for i, (t, x, ub) in enumerate(zip(samples.ts, samples.states, samples.ub)):
        u = ub + ue
        s, _ = compose(scenario, t, x, u, params)
        ds = max(ds, np.linalg.norm(s))
        dsm = max(dsm, np.linalg.norm(s[0:4]))
        dsum = max(dsum, np.linalg.norm(s[4:6]))
        ub_max = max(ub_max, np.linalg.norm(ub))
        s_t, _ = compose(scenario, t + dt_pair, x, u, params)
        lt = max(lt, np.linalg.norm(s_t - s) / dt_pair)
        lmt = max(lmt, np.linalg.norm(s_t[0:4] - s[0:4]) / dt_pair)
        _, x2, ub2, dist = samples.pairs[i]
        s_x, _ = compose(scenario, t, x2, ub2 + ue, params)
        lx = max(lx, np.linalg.norm(s_x - s) / dist)
        lmx = max(lmx, np.linalg.norm(s_x[0:4] - s[0:4]) / dist)
        if not np.isfinite(ds + lt + lx):
            raise UnboundedSample("non-finite uncertainty sample")
    k = margin
    return {"delta_sigma": k * ds, "delta_sigma_m": k * dsm, "delta_sigma_um": k * dsum,
            "L_sigma_t": k * lt, "L_sigma_x": k * lx, "L_sigma_mt": k * lmt,
            "L_sigma_mx": k * lmx, "delta_ub": k * ub_max, "omega_max": samples.omega_max,
            "grid": samples.grid}


def report(cert):
    """key: value lines for every scalar and matrix of a certificate."""
    lines = [f"verdict: {cert.verdict}"]
    ff = cert.first_failed
    lines.append(f"first_failed: {ff if ff else 'none'}")
    for k in ("alpha", "beta", "gamma_lo", "gamma_hi", "c1", "c2", "psi1", "H", "phi1",
              "zeta1", "zeta2", "zeta3", "zeta4", "rho", "V0", "Ts_max", "mu", "c3", "c4"):
        v = getattr(cert, k)
        if v is not None:
            lines.append(f"{k}: {float(v):.17g}")
    for k in PD_ORDER:
        lines.append(f"pd_{k}: {cert.pd[k]}")
    for k in ("cond32", "cond33", "assumption2", "H_covers_reference"):
        v = getattr(cert, k)
        if v is not None:
            lines.append(f"{k}: {v}")
    for k, v in cert.extra.items():
        lines.append(f"{k}: {v}")
    for name, M in cert.matrices.items():
        flat = " ".join(f"{e:.17g}" for e in np.asarray(M).ravel())
        lines.append(f"{name}: {M.shape[0]}x{M.shape[1]} {flat}")
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Inverse of report for scalar and boolean entries."""
    out = {}
    for line in text.splitlines():
        if ": " not in line:
            continue
        k, v = line.split(": ", 1)
        if v in ("True", "False"):
            out[k] = v == "True"
            continue
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = v
    return out
