"""Scenario documents (strict JSON) and trace files (CSV plus JSON sidecar).

A scenario document has the top-level sections ``schema_version``,
``name``, ``game``, ``schedule``, ``plants``, ``controller``,
``integration`` and ``analysis``.  Unknown fields are rejected, every
problem is reported with a JSON-pointer path, and documented defaults are
filled in and echoed back by :func:`scenario_to_dict`.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nashseek.analysis import AnalysisConfig
from nashseek.control import ControllerConfig, ExactSign, Law, Smoothed
from nashseek.errors import InputError, NashSeekError, ParseError, ValidationError
from nashseek.files import atomic_write_text
from nashseek.game import GameSpec, LinearQuadratic
from nashseek.graphs import Periodic, Scripted, SwitchingSchedule
from nashseek.plant import (
    BoundedRational,
    CustomRegressor,
    DisturbanceSpec,
    Exosystem,
    NoDisturbance,
    PiecewiseConstantRandom,
    PlantSpec,
    SinOfState,
    Sinusoid,
    SquareWave,
    ZeroRegressor,
)
from nashseek.sim import LAYOUT_VERSION, Integration, Scenario, SimTrace, StateLayout, scenario_problems

SCHEMA_VERSION = 1

LAW_TAGS = {
    "PerfectInfo": Law.PERFECT_INFO,
    "SingleIntegratorConsensus": Law.CONSENSUS,
    "AdaptiveImperfect": Law.ADAPTIVE,
    "AdaptiveDisturbanceRejection": Law.DISTURBANCE,
}
_LAW_NAMES = {v: k for k, v in LAW_TAGS.items()}
METHOD_TAGS = {"Euler": "euler", "RK4": "rk4"}
_METHOD_NAMES = {v: k for k, v in METHOD_TAGS.items()}

_DISTURBANCE_FIELDS = {
    "None": (),
    "Sinusoid": ("amplitude", "frequency", "phase"),
    "SquareWave": ("amplitude", "period"),
    "PiecewiseConstantRandom": ("amplitude", "dwell", "seed"),
    "Exosystem": ("S", "D", "v0"),
}
_ALL_DISTURBANCE_FIELDS = {f for fs in _DISTURBANCE_FIELDS.values() for f in fs}


@dataclass(frozen=True)
class ScenarioFile:
    scenario: Scenario
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)


# --- strict reading helpers ----------------------------------------------------------


class _Reader:
    def __init__(self):
        self.problems = []

    def fail(self, path, msg):
        self.problems.append((path, msg))

    def obj(self, value, path, required=(), optional=()):
        if not isinstance(value, dict):
            self.fail(path, f"expected an object, got {type(value).__name__}")
            return None
        allowed = set(required) | set(optional)
        for key in value:
            if key not in allowed:
                self.fail(f"{path}/{key}", "unknown field")
        ok = True
        for key in required:
            if key not in value:
                self.fail(f"{path}/{key}", "missing required field")
                ok = False
        return value if ok else None

    def number(self, value, path, *, integer=False, positive=False, nonneg=False, default=None):
        if value is None:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {json.dumps(value)}")
            return default
        if integer and (not isinstance(value, int)):
            self.fail(path, f"expected an integer, got {value}")
            return default
        if positive and not value > 0:
            self.fail(path, f"must be positive, got {value}")
            return default
        if nonneg and not value >= 0:
            self.fail(path, f"must be nonnegative, got {value}")
            return default
        return value

    def array(self, value, path, ndim):
        try:
            arr = np.array(value, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, f"expected a {ndim}-d array of numbers")
            return None
        if arr.ndim != ndim or (ndim and 0 in arr.shape and ndim > 1):
            self.fail(path, f"expected a {ndim}-d array, got shape {arr.shape}")
            return None
        if not np.all(np.isfinite(arr)):
            self.fail(path, "entries must be finite")
            return None
        return arr

    def tag(self, value, path, tags):
        if value not in tags:
            self.fail(path, f"unknown kind {json.dumps(value)}; expected one of {sorted(tags)}")
            return None
        return value

    def build(self, path, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (NashSeekError, ValueError, TypeError) as exc:
            self.fail(path, str(exc))
            return None


# --- sections ------------------------------------------------------------------------


def _game(rd, d):
    g = rd.obj(d, "/game", required=("dims", "M", "r"), optional=("family",))
    if g is None:
        return None
    if g.get("family", "LinearQuadratic") != "LinearQuadratic":
        rd.fail("/game/family", "only LinearQuadratic games can be described in a scenario file")
        return None
    dims = g["dims"]
    if not isinstance(dims, list) or not dims:
        rd.fail("/game/dims", "expected a nonempty list of positive integers")
        return None
    dims = [rd.number(v, f"/game/dims/{i}", integer=True, positive=True) for i, v in enumerate(dims)]
    M = rd.array(g["M"], "/game/M", 2)
    r = rd.array(g["r"], "/game/r", 1)
    if None in dims or M is None or r is None:
        return None
    family = rd.build("/game/M", LinearQuadratic, M, r)
    return None if family is None else rd.build("/game", GameSpec, tuple(dims), family)


def _schedule(rd, d):
    if d is None:
        return None
    s = rd.obj(d, "/schedule", required=("graphs", "timeline", "window"))
    if s is None:
        return None
    graphs = s["graphs"]
    if not isinstance(graphs, list) or not graphs:
        rd.fail("/schedule/graphs", "expected a nonempty list of adjacency matrices")
        return None
    mats = [rd.array(A, f"/schedule/graphs/{p}", 2) for p, A in enumerate(graphs)]
    window = rd.number(s["window"], "/schedule/window", positive=True)
    tl = s["timeline"]
    kind = tl.get("kind") if isinstance(tl, dict) else None
    timeline = None
    if kind == "Periodic":
        tl = rd.obj(tl, "/schedule/timeline", required=("kind", "order", "dwell"))
        if tl is not None:
            dwell = rd.number(tl["dwell"], "/schedule/timeline/dwell", positive=True)
            order = tl["order"]
            if not isinstance(order, list) or not order:
                rd.fail("/schedule/timeline/order", "expected a nonempty list of graph indices")
            else:
                order = [rd.number(v, f"/schedule/timeline/order/{k}", integer=True, nonneg=True)
                         for k, v in enumerate(order)]
                if dwell is not None and None not in order:
                    timeline = Periodic(tuple(order), float(dwell))
    elif kind == "Scripted":
        tl = rd.obj(tl, "/schedule/timeline", required=("kind", "events", "dwell"))
        if tl is not None:
            dwell = rd.number(tl["dwell"], "/schedule/timeline/dwell", positive=True)
            events = tl["events"]
            ok = isinstance(events, list) and events and all(isinstance(e, list) and len(e) == 2 for e in events)
            if not ok:
                rd.fail("/schedule/timeline/events", "expected a nonempty list of [start_time, graph_index] pairs")
            elif dwell is not None:
                ev = [(rd.number(t, f"/schedule/timeline/events/{k}/0", nonneg=True),
                       rd.number(p, f"/schedule/timeline/events/{k}/1", integer=True, nonneg=True))
                      for k, (t, p) in enumerate(events)]
                if all(t is not None and p is not None for t, p in ev):
                    timeline = Scripted(tuple(ev), float(dwell))
    else:
        rd.fail("/schedule/timeline/kind", f"unknown kind {json.dumps(kind)}; expected Periodic or Scripted")
    if any(A is None for A in mats) or timeline is None or window is None:
        return None
    return rd.build("/schedule", SwitchingSchedule, tuple(mats), timeline, float(window))


def _regressor(rd, d, path):
    if d is None:
        return ZeroRegressor()
    kind = d.get("kind") if isinstance(d, dict) else None
    if kind == "Zero":
        r = rd.obj(d, path, required=("kind",), optional=("m",))
        if r is None:
            return None
        m = rd.number(r.get("m"), f"{path}/m", integer=True, positive=True, default=1)
        return None if m is None else ZeroRegressor(m)
    if kind in ("SinOfState", "BoundedRational"):
        r = rd.obj(d, path, required=("kind",), optional=("scale",))
        if r is None:
            return None
        scale = rd.number(r.get("scale"), f"{path}/scale", default=1.0)
        cls = SinOfState if kind == "SinOfState" else BoundedRational
        return None if scale is None else cls(float(scale))
    if kind == "Custom":
        rd.fail(f"{path}/kind", "Custom regressors are only available through the Python API")
        return None
    rd.fail(f"{path}/kind", f"unknown kind {json.dumps(kind)}; expected Zero, SinOfState or BoundedRational")
    return None


def _disturbance(rd, d, path):
    if d is None:
        return DisturbanceSpec()
    if not isinstance(d, dict):
        rd.fail(path, "expected an object")
        return None
    kind = rd.tag(d.get("kind"), f"{path}/kind", _DISTURBANCE_FIELDS)
    if kind is None:
        return None
    bound = d.get("declared_bound")
    if kind == "None":
        # parameters of a previous kind are ignored, so that switching a
        # disturbance off needs a single override
        unknown = [k for k in d if k not in _ALL_DISTURBANCE_FIELDS | {"kind", "declared_bound"}]
        for k in unknown:
            rd.fail(f"{path}/{k}", "unknown field")
        return DisturbanceSpec()
    fields = _DISTURBANCE_FIELDS[kind]
    required = {"Sinusoid": ("amplitude", "frequency"), "PiecewiseConstantRandom": ("amplitude", "dwell")}.get(
        kind, fields)
    r = rd.obj(d, path, required=("kind",) + tuple(required), optional=tuple(fields) + ("declared_bound",))
    if r is None:
        return None
    bound = rd.number(bound, f"{path}/declared_bound", nonneg=True)
    if kind == "Exosystem":
        S = rd.array(r["S"], f"{path}/S", 2)
        D = rd.array(r["D"], f"{path}/D", 2)
        v0 = rd.array(r["v0"], f"{path}/v0", 1)
        if S is None or D is None or v0 is None:
            return None
        gen = Exosystem(S, D, v0)
    else:
        vals = {}
        for f in fields:
            if f in r:
                vals[f] = rd.number(r[f], f"{path}/{f}", integer=(f == "seed"),
                                    positive=f in ("period", "dwell", "frequency"))
                if vals[f] is None:
                    return None
        cls = {"Sinusoid": Sinusoid, "SquareWave": SquareWave, "PiecewiseConstantRandom": PiecewiseConstantRandom}
        gen = rd.build(path, cls[kind], **vals)
        if gen is None:
            return None
    return rd.build(path, DisturbanceSpec, gen, None if bound is None else float(bound))


def _plants(rd, d):
    if not isinstance(d, list) or not d:
        rd.fail("/plants", "expected a nonempty list of plants")
        return None, None
    plants, xi0 = [], []
    for i, p in enumerate(d):
        path = f"/plants/{i}"
        p = rd.obj(p, path, required=("order", "dim"),
                   optional=("regressor", "theta", "disturbance", "poles", "xi0"))
        if p is None:
            plants.append(None)
            continue
        order = rd.number(p["order"], f"{path}/order", integer=True, positive=True)
        dim = rd.number(p["dim"], f"{path}/dim", integer=True, positive=True)
        reg = _regressor(rd, p.get("regressor"), f"{path}/regressor")
        dist = _disturbance(rd, p.get("disturbance"), f"{path}/disturbance")
        theta = None if p.get("theta") is None else rd.array(p["theta"], f"{path}/theta", 1)
        poles = p.get("poles")
        if poles is not None:
            if not isinstance(poles, list):
                rd.fail(f"{path}/poles", "expected a list of poles")
                poles = None
            else:
                poles = tuple(_pole(rd, v, f"{path}/poles/{k}") for k, v in enumerate(poles))
        if order is None or dim is None or reg is None or dist is None:
            plants.append(None)
            continue
        if p.get("xi0") is None:
            xi0.append(np.zeros(order * dim))
        else:
            v = rd.array(p["xi0"], f"{path}/xi0", 1)
            xi0.append(v if v is not None else np.zeros(order * dim))
        plants.append(rd.build(path, PlantSpec, order, dim, reg, theta, dist, poles))
    return plants, xi0


def _pole(rd, v, path):
    if isinstance(v, list) and len(v) == 2:
        re_, im_ = (rd.number(x, path) for x in v)
        return complex(re_ or 0.0, im_ or 0.0)
    val = rd.number(v, path)
    return float(val) if val is not None else 0.0


def _controller(rd, d):
    c = rd.obj(d, "/controller", required=("law", "delta"),
               optional=("k", "kappa", "Lambda", "sign_mode", "gamma_hat0", "z0", "theta_hat0", "d_hat0"))
    if c is None:
        return None
    law = rd.tag(c["law"], "/controller/law", LAW_TAGS)
    delta = rd.number(c["delta"], "/controller/delta")
    kw = {}
    for key in ("k", "kappa"):
        if key in c:
            v = rd.array(c[key], f"/controller/{key}", 1)
            kw[key] = () if v is None else tuple(v.tolist())
    if "Lambda" in c:
        if not isinstance(c["Lambda"], list):
            rd.fail("/controller/Lambda", "expected a list of matrices")
        else:
            mats = [rd.array(L, f"/controller/Lambda/{i}", 2) for i, L in enumerate(c["Lambda"])]
            kw["Lambda"] = tuple(np.zeros((0, 0)) if m is None else m for m in mats)
    sm = c.get("sign_mode")
    if sm is not None:
        kind = sm.get("kind") if isinstance(sm, dict) else None
        if kind == "Exact":
            if rd.obj(sm, "/controller/sign_mode", required=("kind",)) is not None:
                kw["sign_mode"] = ExactSign()
        elif kind == "Smoothed":
            s = rd.obj(sm, "/controller/sign_mode", required=("kind", "epsilon"))
            if s is not None:
                eps = rd.number(s["epsilon"], "/controller/sign_mode/epsilon", positive=True)
                if eps is not None:
                    kw["sign_mode"] = Smoothed(float(eps))
        else:
            rd.fail("/controller/sign_mode/kind", f"unknown kind {json.dumps(kind)}; expected Exact or Smoothed")
    for key in ("gamma_hat0", "theta_hat0"):
        if c.get(key) is not None:
            if not isinstance(c[key], list):
                rd.fail(f"/controller/{key}", "expected a list with one vector per player")
            else:
                vals = [rd.array(v, f"/controller/{key}/{i}", 1) for i, v in enumerate(c[key])]
                if all(v is not None for v in vals):
                    kw[key] = tuple(vals)
    if c.get("z0") is not None:
        z0 = rd.array(c["z0"], "/controller/z0", 2)
        if z0 is not None:
            kw["z0"] = z0
    if c.get("d_hat0") is not None:
        v = rd.array(c["d_hat0"], "/controller/d_hat0", 1)
        if v is not None:
            kw["d_hat0"] = tuple(v.tolist())
    if law is None or delta is None:
        return None
    return rd.build("/controller", ControllerConfig, LAW_TAGS[law], float(delta), **kw)


def _integration(rd, d):
    if d is None:
        return Integration()
    g = rd.obj(d, "/integration", optional=("h", "horizon", "method", "stride"))
    if g is None:
        return None
    defaults = Integration()
    h = rd.number(g.get("h"), "/integration/h", positive=True, default=defaults.h)
    T = rd.number(g.get("horizon"), "/integration/horizon", positive=True, default=defaults.horizon)
    stride = rd.number(g.get("stride"), "/integration/stride", integer=True, positive=True,
                       default=defaults.stride)
    method = g.get("method", _METHOD_NAMES[defaults.method])
    if rd.tag(method, "/integration/method", METHOD_TAGS) is None:
        return None
    if h is None or T is None or stride is None:
        return None
    return Integration(float(h), float(T), METHOD_TAGS[method], int(stride))


_ANALYSIS_FIELDS = ("tol_ne", "tol_xs", "fit_window", "rate_max", "v_rate_tol", "bound_factor",
                    "trend_fraction", "trend_slack")


def _analysis(rd, d):
    if d is None:
        return AnalysisConfig()
    a = rd.obj(d, "/analysis", optional=_ANALYSIS_FIELDS)
    if a is None:
        return None
    kw = {}
    for key in _ANALYSIS_FIELDS:
        if a.get(key) is None:
            continue
        if key == "fit_window":
            w = rd.array(a[key], "/analysis/fit_window", 1)
            if w is not None and w.shape == (2,) and w[0] < w[1]:
                kw[key] = (float(w[0]), float(w[1]))
            elif w is not None:
                rd.fail("/analysis/fit_window", "expected [t_start, t_end] with t_start < t_end")
        else:
            v = rd.number(a[key], f"/analysis/{key}", positive=key != "rate_max")
            if v is not None:
                kw[key] = float(v)
    return AnalysisConfig(**kw)


# --- public API ----------------------------------------------------------------------


def parse_json(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc


def scenario_from_dict(doc, *, allow_zero_delta: bool = False, check: bool = True) -> ScenarioFile:
    """Build and validate a scenario; raises :class:`ValidationError` listing
    every problem found."""
    rd = _Reader()
    top = rd.obj(doc, "", required=("schema_version", "game", "plants", "controller"),
                 optional=("name", "schedule", "integration", "analysis"))
    if top is None:
        raise ValidationError(rd.problems)
    version = top["schema_version"]
    if version != SCHEMA_VERSION:
        rd.fail("/schema_version", f"unsupported schema version {json.dumps(version)}; expected {SCHEMA_VERSION}")
        raise ValidationError(rd.problems)
    name = top.get("name", "")
    if not isinstance(name, str):
        rd.fail("/name", "expected a string")
    game = _game(rd, top["game"])
    schedule = _schedule(rd, top.get("schedule"))
    plants, xi0 = _plants(rd, top["plants"])
    controller = _controller(rd, top["controller"])
    integration = _integration(rd, top.get("integration"))
    analysis = _analysis(rd, top.get("analysis"))
    if rd.problems or game is None or controller is None or integration is None or any(p is None for p in plants):
        raise ValidationError(rd.problems or [("", "invalid scenario")])
    sc = Scenario(game, tuple(plants), controller, integration, schedule, tuple(xi0), name)
    if check:
        problems = scenario_problems(sc, allow_zero_delta)
        if problems:
            raise ValidationError(problems)
    return ScenarioFile(sc, analysis)


def load_scenario(path, overrides=(), **kwargs) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    doc = parse_json(text)
    if overrides:
        doc = apply_overrides(doc, overrides)
    return scenario_from_dict(doc, **kwargs)


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``dotted.path=value`` assignments to a raw document.

    Values are read as JSON when possible (numbers, lists, null) and as bare
    strings otherwise.  Integer path segments index lists.
    """
    doc = copy.deepcopy(doc)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise InputError(f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = doc
        for k, part in enumerate(parts):
            last = k == len(parts) - 1
            if isinstance(node, list):
                try:
                    idx = int(part)
                    node[idx]
                except (ValueError, IndexError):
                    raise InputError(f"override path {key!r}: no list element {part!r}") from None
                if last:
                    node[idx] = value
                else:
                    node = node[idx]
            elif isinstance(node, dict):
                if last:
                    node[part] = value
                else:
                    if node.get(part) is None:
                        node[part] = {}
                    node = node[part]
            else:
                raise InputError(f"override path {key!r} descends into a scalar")
    return doc


def _vec(a):
    return [float(v) for v in np.ravel(a)]


def _mat(a):
    return [[float(v) for v in row] for row in np.atleast_2d(a)]


def _disturbance_dict(spec: DisturbanceSpec) -> dict:
    kind = spec.kind
    if isinstance(kind, NoDisturbance):
        return {"kind": "None"}
    if isinstance(kind, Exosystem):
        out = {"kind": "Exosystem", "S": _mat(kind.S), "D": _mat(kind.D), "v0": _vec(kind.v0)}
    else:
        name = type(kind).__name__
        out = {"kind": name}
        for f in _DISTURBANCE_FIELDS[name]:
            out[f] = getattr(kind, f)
    out["declared_bound"] = spec.declared_bound
    return out


def _regressor_dict(reg) -> dict:
    if isinstance(reg, ZeroRegressor):
        return {"kind": "Zero", "m": reg.m}
    if isinstance(reg, (SinOfState, BoundedRational)):
        return {"kind": type(reg).__name__, "scale": reg.scale}
    if isinstance(reg, CustomRegressor):
        return {"kind": "Custom", "m": reg.m}
    raise InputError(f"cannot serialize regressor {reg!r}")


def scenario_to_dict(sc: Scenario, analysis: AnalysisConfig | None = None) -> dict:
    """Fully resolved document for ``sc``; defaults appear explicitly."""
    game = sc.game
    fam = game.cost_family
    if not isinstance(fam, LinearQuadratic):
        raise InputError("only LinearQuadratic games can be serialized")
    doc = {"schema_version": SCHEMA_VERSION, "name": sc.name,
           "game": {"family": "LinearQuadratic", "dims": list(game.dims), "M": _mat(fam.M), "r": _vec(fam.r)}}
    if sc.schedule is None:
        doc["schedule"] = None
    else:
        tl = sc.schedule.timeline
        if isinstance(tl, Periodic):
            tdoc = {"kind": "Periodic", "order": list(tl.order), "dwell": tl.dwell}
        else:
            tdoc = {"kind": "Scripted", "events": [[t, p] for t, p in tl.events], "dwell": tl.dwell}
        doc["schedule"] = {"graphs": [_mat(A) for A in sc.schedule.graphs], "timeline": tdoc,
                           "window": sc.schedule.window}
    plants = []
    for i, p in enumerate(sc.plants):
        R = p.realization()
        poles = np.roots(np.concatenate([[1.0], np.asarray(R.coeffs)[::-1]])) if R.coeffs else []
        xi0 = sc.xi0[i] if sc.xi0 is not None else np.zeros(p.order * p.dim)
        plants.append({
            "order": p.order,
            "dim": p.dim,
            "regressor": _regressor_dict(p.regressor),
            "theta": _vec(p.theta),
            "disturbance": _disturbance_dict(p.disturbance),
            "poles": None if p.poles is None else [[float(np.real(z)), float(np.imag(z))] for z in p.poles],
            "hurwitz_coeffs": list(R.coeffs),
            "resolved_poles": [[float(np.real(z)), float(np.imag(z))] for z in poles],
            "xi0": _vec(xi0),
        })
    doc["plants"] = plants
    cfg = sc.controller
    ctrl = {"law": _LAW_NAMES[cfg.law], "delta": cfg.delta, "k": list(cfg.k), "kappa": list(cfg.kappa),
            "Lambda": [_mat(L) for L in cfg.Lambda]}
    mode = cfg.sign_mode
    ctrl["sign_mode"] = {"kind": "Exact"} if isinstance(mode, ExactSign) else {"kind": "Smoothed",
                                                                                 "epsilon": mode.epsilon}
    ctrl["gamma_hat0"] = None if cfg.gamma_hat0 is None else [_vec(v) for v in cfg.gamma_hat0]
    ctrl["z0"] = None if cfg.z0 is None else _mat(cfg.z0)
    ctrl["theta_hat0"] = None if cfg.theta_hat0 is None else [_vec(v) for v in cfg.theta_hat0]
    ctrl["d_hat0"] = None if cfg.d_hat0 is None else list(cfg.d_hat0)
    doc["controller"] = ctrl
    integ = sc.integration
    doc["integration"] = {"h": integ.h, "horizon": integ.horizon, "method": _METHOD_NAMES[integ.method],
                          "stride": integ.stride}
    if analysis is not None:
        a = {}
        for key in _ANALYSIS_FIELDS:
            v = getattr(analysis, key)
            a[key] = list(v) if isinstance(v, tuple) else v
        doc["analysis"] = a
    return doc


def loadable_dict(resolved: dict) -> dict:
    """Strip the informational fields that :func:`scenario_to_dict` adds so
    the document can be parsed again."""
    doc = copy.deepcopy(resolved)
    for p in doc.get("plants", []):
        p.pop("hurwitz_coeffs", None)
        p.pop("resolved_poles", None)
    if "analysis" in doc and isinstance(doc["analysis"], dict):
        doc["analysis"] = {k: v for k, v in doc["analysis"].items() if v is not None}
    return doc


def dump_scenario(sc: Scenario, path, analysis: AnalysisConfig | None = None) -> Path:
    return atomic_write_text(path, json.dumps(loadable_dict(scenario_to_dict(sc, analysis)), indent=2) + "\n")


# --- traces --------------------------------------------------------------------------


def monitor_columns(law: Law) -> list:
    """(column name, monitor key) pairs written after the state columns."""
    v_name = {Law.PERFECT_INFO: "V_ne", Law.ADAPTIVE: "V2", Law.DISTURBANCE: "V"}.get(law)
    cols = [] if v_name is None else [(v_name, "V")]
    cols += [("dist_ne", "dist_ne"), ("gamma_ne", "gamma_ne"), ("xs_norm", "xs_norm")]
    if law is not Law.PERFECT_INFO:
        cols.append(("cons_err", "cons_err"))
    if law in (Law.ADAPTIVE, Law.DISTURBANCE):
        cols += [("gamma_err", "gamma_err"), ("theta_err", "theta_err")]
    if law is Law.DISTURBANCE:
        cols += [("D_err", "D_err"), ("chatter_rate", None)]
    return cols


def _fmt(v) -> str:
    return repr(float(v))


def trace_csv(trace: SimTrace) -> str:
    n = trace.u.shape[1]
    game = trace.scenario.game
    comp = [f"{i + 1}_{c + 1}" for i in range(game.num_players) for c in range(game.dims[i])]
    assert len(comp) == n
    mons = monitor_columns(trace.law)
    header = ["t", "sigma"] + list(trace.layout_names) + [f"u_{c}" for c in comp] + [f"d_{c}" for c in comp]
    header += [name for name, _ in mons]
    chatter = trace.stats.get("chatter_rate", 0.0)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    mon_cols = [trace.monitors[key] if key is not None else None for _, key in mons]
    for k in range(len(trace.t)):
        row = [_fmt(trace.t[k]), str(int(trace.sigma[k]))]
        row += [_fmt(v) for v in trace.states[k]]
        row += [_fmt(v) for v in trace.u[k]]
        row += [_fmt(v) for v in trace.d[k]]
        row += [_fmt(chatter) if col is None else _fmt(col[k]) for col in mon_cols]
        w.writerow(row)
    return buf.getvalue()


def git_blob_sha1(data: bytes) -> str:
    """Content hash in the form git uses for blobs."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def write_trace(trace: SimTrace, path, analysis: AnalysisConfig | None = None) -> tuple:
    """Write ``path`` (CSV) and ``path`` with a ``.json`` suffix (sidecar).

    Returns the two paths.
    """
    path = Path(path)
    text = trace_csv(trace)
    sidecar = {
        "layout_version": trace.layout_version,
        "law": _LAW_NAMES[trace.law],
        "content_hash": git_blob_sha1(text.encode("utf-8")),
        "rows": int(len(trace.t)),
        "x_star": _vec(trace.x_star),
        "stats": _plain(trace.stats),
        "scenario": scenario_to_dict(trace.scenario, analysis),
    }
    csv_path = atomic_write_text(path, text)
    meta_path = atomic_write_text(path.with_suffix(".json"), json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def read_trace(path) -> SimTrace:
    """Load a trace written by :func:`write_trace` back into a :class:`SimTrace`."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    if meta.get("layout_version") != LAYOUT_VERSION:
        raise InputError(f"unsupported trace layout {meta.get('layout_version')!r}")
    data = path.read_bytes()
    if git_blob_sha1(data) != meta["content_hash"]:
        raise InputError(f"{path} does not match the content hash in its sidecar")
    sc = scenario_from_dict(loadable_dict(meta["scenario"]), allow_zero_delta=True).scenario
    rows = list(csv.reader(_io.StringIO(data.decode("utf-8"))))
    header, body = rows[0], rows[1:]
    table = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    col = {name: k for k, name in enumerate(header)}
    layout = StateLayout(sc.game, sc.plants, sc.law)
    n = sc.game.n
    s0 = 2
    s1 = s0 + layout.size
    states = table[:, s0:s1]
    u = table[:, s1:s1 + n]
    d = table[:, s1 + n:s1 + 2 * n]
    monitors = {}
    for name, key in monitor_columns(sc.law):
        if key is not None:
            monitors[key] = table[:, col[name]]
    return SimTrace(table[:, 0], table[:, 1].astype(int), states, u, d, monitors,
                    np.asarray(meta["x_star"], dtype=float), list(layout.names), sc.law, meta["stats"], sc)
