"""TOML configuration loading with strict key checking and dotted overrides.

Every omitted field takes its default; unknown keys and out-of-range values
are errors located by line and column where possible. See README for the
full key list.
"""
import copy
import re
from dataclasses import dataclass, field

import numpy as np
import tomli

from . import disturbances as dist
from .bounds import CertificationInputs
from .dynamics import VehicleParams
from .errors import ParseError, RangeError, UnknownKey
from .geometric import GainSet
from .l1 import L1Params
from .sim import SimConfig
from .trajectories import make_trajectory

DEFAULTS = {
    "vehicle": {"m": 0.62, "J": [3.0e-3, 1.8e-3, 3.2e-3], "g": 9.81, "arm": 0.11,
                "yaw_coeff": 0.01, "f_max": 8.0, "saturate": False},
    "gains": {"Kp": [14.0, 15.0, 15.0], "Kv": [1.5, 0.9, 1.1], "KR": [0.55, 0.35, 0.15],
              "KOmega": [0.035, 0.03, 0.004], "c1": 1.0, "c2": 1.0},
    "l1": {"As": [-5.0, -5.0, -5.0, -10.0, -10.0, -10.0], "Ts": 0.0025, "omega_f": 30.0,
           "omega_Mx": 15.0, "omega_My": 15.0, "omega_Mz": 5.0, "clamp_thrust": -1.0,
           "clamp_moment": 1.0},
    "sim": {"duration": 10.0, "substeps": 1, "seed": 0, "l1_enabled": True,
            "modes": ["l1"], "init_dp": [0.0, 0.0, 0.0], "init_dv": [0.0, 0.0, 0.0],
            "init_dtheta": [0.0, 0.0, 0.0], "init_dOmega": [0.0, 0.0, 0.0],
            "init_random": 0.0, "abort_radius": 10.0, "rmse_window": [0.0, -1.0]},
    "trajectory": {"kind": "hover", "p0": [0.0, 0.0, -1.0], "psi0": 0.0, "radius": 1.0,
                   "speed": 2.5, "altitude": 1.0, "v_max": 1.0},
    "scenario": {"name": "nominal", "l1_schedule": [], "terms": []},
    "bounds": {"c1": -1.0, "c2": -1.0, "psi1": -1.0, "H": -1.0, "eps": 1e-3, "eps_v": 1e-3,
               "t1": 1.0, "rho": -1.0, "calibrate": True, "samples": 400, "margin": 1.2,
               "tube_search": True},
    "sweep": {"speeds": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5], "weights": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
              "modes": ["l1", "baseline"], "kind": "added", "radius": 1.0, "duration": 10.0,
              "window": [5.0, 10.0], "background": True},
    "estimate": {"Ts_list": [0.005, 0.0025, 0.00125, 0.000625], "duration": 4.0,
                 "signal": "sinusoid", "amplitude": 0.6},
}

# negative sentinels above mean "unset"
_UNSET_KEYS = {("l1", "clamp_thrust"), ("bounds", "c1"), ("bounds", "c2"), ("bounds", "psi1"),
               ("bounds", "H"), ("bounds", "rho")}

TERM_FIELDS = {
    "injected": {"components": [], "bias": [0.0] * 6, "window": []},
    "sinusoid_injection": {"amplitude": 0.6, "t_end": 16.0},
    "constant_wrench": {"F0": [0.0, 0.0, 0.0], "M0": [0.0, 0.0, 0.0], "window": []},
    "mass_mismatch": {"m_real": 0.62},
    "thrust_scale": {"scales": [1.0, 1.0, 1.0, 1.0], "window": []},
    "voltage_drop": {"v_start": 4.2, "v_end": 3.2, "tau": 10.0, "v_nominal": 4.2},
    "ground_effect": {"surface": 0.0, "gain": 0.1, "decay": 0.1},
    "slung_payload": {"mass": 0.1, "length": 0.4, "offset": [0.0, 0.0, 0.0],
                      "initial_angle": 0.0},
    "drag": {"coeff": 0.1, "wind": [0.0, 0.0, 0.0]},
}


@dataclass
class AppConfig:
    sim: SimConfig
    cert: CertificationInputs
    raw: dict
    modes: list = field(default_factory=lambda: ["l1"])


def _locate(text, section, key):
    """Best-effort (line, column) of `key` inside `[section]`."""
    if text is None:
        return None, None
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        mh = re.match(r"^\[\[?\s*([^\]]+?)\s*\]\]?", s)
        if mh:
            cur = mh.group(1)
            continue
        mk = re.match(r"^(\s*)([A-Za-z0-9_\"'.-]+)\s*=", line)
        if mk:
            k = mk.group(2).strip("\"'")
            full = f"{cur}.{k}" if cur else k
            if k == key and (cur == section or full == f"{section}.{key}"):
                return i, len(mk.group(1)) + 1
    return None, None


def _parse_value(v):
    try:
        return tomli.loads(f"v = {v}")["v"]
    except tomli.TOMLDecodeError:
        return v


def apply_override(raw, item):
    """Apply a single 'section.key=value' override to a raw config dict."""
    if "=" not in item:
        raise ParseError(f"override {item!r} is not of the form key=value")
    key, val = item.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) != 2:
        raise UnknownKey(f"override key {key!r} must be section.key")
    sec, k = parts
    if sec not in DEFAULTS:
        raise UnknownKey(f"unknown section {sec!r} in override")
    if k not in DEFAULTS[sec]:
        raise UnknownKey(f"unknown key {key!r} in override")
    raw.setdefault(sec, {})[k] = _parse_value(val.strip())
    return raw


def _merge(raw, text):
    cfg = copy.deepcopy(DEFAULTS)
    for sec, body in raw.items():
        if sec not in DEFAULTS:
            line, col = _locate(text, None, sec)
            if line is None:
                for i, l in enumerate((text or "").splitlines(), 1):
                    if re.match(rf"^\s*\[\[?\s*{re.escape(sec)}[\].]", l):
                        line, col = i, l.index("[") + 1
                        break
            raise UnknownKey(f"unknown section {sec!r}", line, col)
        if not isinstance(body, dict):
            raise ParseError(f"{sec!r} must be a table")
        for k, v in body.items():
            if k not in DEFAULTS[sec]:
                line, col = _locate(text, sec, k)
                raise UnknownKey(f"unknown key {sec}.{k}", line, col)
            cfg[sec][k] = v
    return cfg


def _vec(cfg, sec, key, n, text, positive=False, negative=False):
    v = cfg[sec][key]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [float(v)] * n
    try:
        arr = [float(a) for a in v]
    except (TypeError, ValueError):
        line, col = _locate(text, sec, key)
        raise RangeError(f"{sec}.{key} must be a list of {n} numbers", line, col)
    if len(arr) != n or not all(np.isfinite(arr)):
        line, col = _locate(text, sec, key)
        raise RangeError(f"{sec}.{key} must be a list of {n} finite numbers", line, col)
    if positive and any(a <= 0 for a in arr):
        line, col = _locate(text, sec, key)
        raise RangeError(f"{sec}.{key} must be positive", line, col)
    if negative and any(a >= 0 for a in arr):
        line, col = _locate(text, sec, key)
        raise RangeError(f"{sec}.{key} must be negative", line, col)
    return tuple(arr)


def _num(cfg, sec, key, text, lo=None, hi=None, strict_lo=True, integer=False):
    v = cfg[sec][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        line, col = _locate(text, sec, key)
        raise RangeError(f"{sec}.{key} must be a number", line, col)
    if (sec, key) in _UNSET_KEYS and v < 0:
        return None
    bad = (lo is not None and (v <= lo if strict_lo else v < lo)) or (hi is not None and v > hi)
    if bad or not np.isfinite(v) or (integer and int(v) != v):
        line, col = _locate(text, sec, key)
        raise RangeError(f"{sec}.{key} = {v} is out of range", line, col)
    return int(v) if integer else float(v)


def _bool(cfg, sec, key, text):
    v = cfg[sec][key]
    if not isinstance(v, bool):
        line, col = _locate(text, sec, key)
        raise RangeError(f"{sec}.{key} must be true or false", line, col)
    return v


def build_term(item, text=None):
    """Disturbance term from a config table with a `type` field."""
    item = dict(item)
    kind = item.pop("type", None)
    if kind not in TERM_FIELDS:
        line, col = _locate(text, "scenario.terms", "type")
        raise RangeError(f"unknown disturbance type {kind!r}", line, col)
    allowed = TERM_FIELDS[kind]
    for k in item:
        if k not in allowed:
            line, col = _locate(text, "scenario.terms", k)
            raise UnknownKey(f"unknown key {k!r} for disturbance type {kind!r}", line, col)
    p = {**allowed, **item}
    win = tuple(p["window"]) if "window" in p and p["window"] else None
    try:
        if kind == "injected":
            comps = tuple(tuple(float(a) for a in c) for c in p["components"])
            if any(len(c) != 4 or not 0 <= c[0] < 6 for c in comps):
                raise RangeError("injected components are [channel, amplitude, rate, phase]")
            return dist.InjectedSignal(components=comps, bias=tuple(map(float, p["bias"])),
                                       window=win)
        if kind == "sinusoid_injection":
            return dist.sinusoid_injection(float(p["amplitude"]), float(p["t_end"]))
        if kind == "constant_wrench":
            return dist.ConstantWrench(tuple(map(float, p["F0"])), tuple(map(float, p["M0"])), win)
        if kind == "mass_mismatch":
            if p["m_real"] <= 0:
                raise RangeError("mass_mismatch.m_real must be positive")
            return dist.MassMismatch(float(p["m_real"]))
        if kind == "thrust_scale":
            sc = tuple(map(float, p["scales"]))
            if len(sc) != 4 or any(not 0 < s <= 2 for s in sc):
                raise RangeError("thrust_scale.scales must be four values in (0, 2]")
            return dist.ThrustScale(sc, win)
        if kind == "voltage_drop":
            if p["tau"] <= 0 or p["v_nominal"] <= 0:
                raise RangeError("voltage_drop tau and v_nominal must be positive")
            return dist.VoltageDrop(float(p["v_start"]), float(p["v_end"]), float(p["tau"]),
                                    float(p["v_nominal"]))
        if kind == "ground_effect":
            if p["decay"] <= 0:
                raise RangeError("ground_effect.decay must be positive")
            return dist.GroundEffect(float(p["surface"]), float(p["gain"]), float(p["decay"]))
        if kind == "slung_payload":
            if p["mass"] < 0 or p["length"] <= 0:
                raise RangeError("slung_payload needs mass >= 0 and length > 0")
            return dist.SlungPayload(float(p["mass"]), float(p["length"]),
                                     tuple(map(float, p["offset"])), float(p["initial_angle"]))
        if kind == "drag":
            return dist.LinearDrag(float(p["coeff"]), tuple(map(float, p["wind"])))
    except RangeError as e:
        line, col = _locate(text, "scenario.terms", "type")
        raise RangeError(str(e), line, col) from None
    except (TypeError, ValueError) as e:
        raise RangeError(f"bad value in {kind!r} disturbance: {e}") from None


def parse_config(text="", overrides=()):
    """Parse TOML text into an AppConfig. Raises ParseError, UnknownKey or RangeError."""
    try:
        raw = tomli.loads(text or "")
    except tomli.TOMLDecodeError as e:
        m = re.search(r"line (\d+), column (\d+)", str(e))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ParseError(f"malformed configuration: {e}", line, col) from None
    for o in overrides:
        apply_override(raw, o)
    cfg = _merge(raw, text)
    t = text

    veh = VehicleParams(m=_num(cfg, "vehicle", "m", t, lo=0),
                        J=_vec(cfg, "vehicle", "J", 3, t, positive=True),
                        g=_num(cfg, "vehicle", "g", t, lo=0),
                        arm=_num(cfg, "vehicle", "arm", t, lo=0),
                        yaw_coeff=_num(cfg, "vehicle", "yaw_coeff", t, lo=0),
                        f_max=_num(cfg, "vehicle", "f_max", t, lo=0),
                        saturate=_bool(cfg, "vehicle", "saturate", t))
    gains = GainSet(Kp=_vec(cfg, "gains", "Kp", 3, t, positive=True),
                    Kv=_vec(cfg, "gains", "Kv", 3, t, positive=True),
                    KR=_vec(cfg, "gains", "KR", 3, t, positive=True),
                    KOmega=_vec(cfg, "gains", "KOmega", 3, t, positive=True),
                    c1=_num(cfg, "gains", "c1", t, lo=0, strict_lo=False),
                    c2=_num(cfg, "gains", "c2", t, lo=0, strict_lo=False))
    l1p = L1Params(As=_vec(cfg, "l1", "As", 6, t, negative=True),
                   Ts=_num(cfg, "l1", "Ts", t, lo=0, hi=0.01),
                   omega=(_num(cfg, "l1", "omega_f", t, lo=0), _num(cfg, "l1", "omega_Mx", t, lo=0),
                          _num(cfg, "l1", "omega_My", t, lo=0), _num(cfg, "l1", "omega_Mz", t, lo=0)),
                   clamp_thrust=_num(cfg, "l1", "clamp_thrust", t, lo=0),
                   clamp_moment=_num(cfg, "l1", "clamp_moment", t, lo=0))

    tr = cfg["trajectory"]
    kind = tr["kind"]
    if kind == "hover":
        traj = make_trajectory("hover", p0=_vec(cfg, "trajectory", "p0", 3, t),
                               psi0=_num(cfg, "trajectory", "psi0", t))
    elif kind == "circle":
        traj = make_trajectory("circle", radius=_num(cfg, "trajectory", "radius", t, lo=0),
                               speed=_num(cfg, "trajectory", "speed", t, lo=0, strict_lo=False),
                               altitude=_num(cfg, "trajectory", "altitude", t),
                               psi0=_num(cfg, "trajectory", "psi0", t))
    elif kind == "figure8":
        traj = make_trajectory("figure8", v_max=_num(cfg, "trajectory", "v_max", t, lo=0,
                                                     strict_lo=False),
                               psi0=_num(cfg, "trajectory", "psi0", t))
    else:
        line, col = _locate(t, "trajectory", "kind")
        raise RangeError(f"unknown trajectory kind {kind!r}", line, col)

    duration = _num(cfg, "sim", "duration", t, lo=0)
    sch = cfg["scenario"]["l1_schedule"]
    try:
        schedule = tuple((float(a), bool(b)) for a, b in sch)
    except (TypeError, ValueError):
        line, col = _locate(t, "scenario", "l1_schedule")
        raise RangeError("scenario.l1_schedule must be a list of [time, enabled] pairs", line, col)
    if [s[0] for s in schedule] != sorted(s[0] for s in schedule):
        line, col = _locate(t, "scenario", "l1_schedule")
        raise RangeError("scenario.l1_schedule times must be sorted", line, col)
    terms = [build_term(s, t) for s in cfg["scenario"]["terms"]]
    scenario = dist.Scenario(name=str(cfg["scenario"]["name"]), terms=terms, duration=duration,
                             trajectory=kind, l1_schedule=schedule)
    modes = list(cfg["sim"]["modes"])
    if not modes or any(m not in ("l1", "baseline") for m in modes):
        line, col = _locate(t, "sim", "modes")
        raise RangeError("sim.modes entries must be 'l1' or 'baseline'", line, col)
    simcfg = SimConfig(params=veh, gains=gains, l1p=l1p, scenario=scenario, trajectory=traj,
                       duration=duration,
                       substeps=_num(cfg, "sim", "substeps", t, lo=1, hi=10, strict_lo=False,
                                     integer=True),
                       seed=_num(cfg, "sim", "seed", t, lo=0, strict_lo=False, integer=True),
                       l1_enabled=_bool(cfg, "sim", "l1_enabled", t),
                       init_dp=_vec(cfg, "sim", "init_dp", 3, t),
                       init_dv=_vec(cfg, "sim", "init_dv", 3, t),
                       init_dtheta=_vec(cfg, "sim", "init_dtheta", 3, t),
                       init_dOmega=_vec(cfg, "sim", "init_dOmega", 3, t),
                       init_random=_num(cfg, "sim", "init_random", t, lo=0, strict_lo=False),
                       abort_radius=_num(cfg, "sim", "abort_radius", t, lo=0))
    b = cfg["bounds"]
    psi1 = _num(cfg, "bounds", "psi1", t, lo=0, hi=0.999999999)
    ci = CertificationInputs(gains=gains, params=veh, l1p=l1p,
                             psi1=0.1 if psi1 is None else psi1,
                             H=_num(cfg, "bounds", "H", t, lo=0) or 6.5,
                             eps=_num(cfg, "bounds", "eps", t, lo=0),
                             eps_v=_num(cfg, "bounds", "eps_v", t, lo=0, strict_lo=False),
                             t1=_num(cfg, "bounds", "t1", t, lo=0, strict_lo=False))
    for k in ("c1", "c2", "rho"):
        _num(cfg, "bounds", k, t)
    _num(cfg, "bounds", "samples", t, lo=0, integer=True)
    _num(cfg, "bounds", "margin", t, lo=1, strict_lo=False)
    for sec, k in (("bounds", "calibrate"), ("bounds", "tube_search"), ("sweep", "background")):
        _bool(cfg, sec, k, t)
    _num(cfg, "sweep", "radius", t, lo=0)
    _num(cfg, "sweep", "duration", t, lo=0)
    if cfg["sweep"]["kind"] not in ("added", "slung"):
        line, col = _locate(t, "sweep", "kind")
        raise RangeError("sweep.kind must be 'added' or 'slung'", line, col)
    if cfg["estimate"]["signal"] not in ("sinusoid", "constant", "zero"):
        line, col = _locate(t, "estimate", "signal")
        raise RangeError("estimate.signal must be sinusoid, constant or zero", line, col)
    return AppConfig(sim=simcfg, cert=ci, raw=cfg, modes=modes)


def load_config(path=None, overrides=()):
    text = ""
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, overrides)
