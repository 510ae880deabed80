"""Theorem-level acceptance suites built on the bundled scenarios.

Each suite integrates one or more scenarios, turns the traces into
:class:`~nashseek.analysis.Criterion` rows and times itself.  The same
functions back ``nashseek suite`` and the acceptance tests.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from nashseek.analysis import Criterion, check, theorem_verdict
from nashseek.control import Smoothed
from nashseek.graphs import Periodic, SwitchingSchedule, is_jointly_strongly_connected
from nashseek.io import ScenarioFile, load_scenario
from nashseek.plant import PlantSpec, SinOfState
from nashseek.sim import Scenario, integrate, reference_ne

SUITE_NAMES = ("theorem1", "theorem2", "theorem3", "theorem4")

BUNDLED = {
    "theorem1": "theorem1_perfect.json",
    "theorem2": "theorem2_3player.json",
    "theorem3": "theorem3_adaptive.json",
    "theorem4": "theorem4_disturbance.json",
}

RUNTIME_BUDGET = {"theorem1": 10.0, "theorem2": 30.0, "theorem3": 60.0, "theorem4": 60.0}

# a step-to-step increase of the Lyapunov monitor below this multiple of
# machine epsilon times the monitor's size is floating-point noise
ROUNDOFF_FACTOR = 16.0


@dataclass
class SuiteResult:
    name: str
    criteria: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)


def bundled_path(name: str):
    return resources.files("nashseek") / "scenarios" / BUNDLED[name]


def load_bundled(name: str, overrides=()) -> ScenarioFile:
    with resources.as_file(bundled_path(name)) as path:
        return load_scenario(path, overrides)


def _with_integration(sc: Scenario, **changes) -> Scenario:
    return dataclasses.replace(sc, integration=dataclasses.replace(sc.integration, **changes))


def _prefixed(label: str, criteria) -> list:
    return [dataclasses.replace(c, name=f"{label}: {c.name}") for c in criteria]


def _verdict_rows(label, trace, analysis, keep=None):
    rep = theorem_verdict(trace, config=analysis)
    rows = rep.criteria if keep is None else [c for c in rep.criteria if c.name in keep]
    return rep, _prefixed(label, rows)


def _runtime_row(name: str, elapsed: float) -> Criterion:
    return check("runtime [s]", elapsed, RUNTIME_BUDGET[name], "<")


def _halving_row(label, coarse, fine, v_scale) -> Criterion:
    """Max per-step V increment at h/2 must be at most half the one at h,
    unless both sit at the floating-point noise level."""
    floor = ROUNDOFF_FACTOR * np.finfo(float).eps * v_scale
    inc_h = coarse.stats["v_max_increment"]
    inc_h2 = fine.stats["v_max_increment"]
    threshold = max(0.5 * inc_h, floor)
    return check(f"{label}: max V increment at h/2 vs half of that at h", inc_h2, threshold,
                 detail=f"h: {inc_h:.3e}, h/2: {inc_h2:.3e}, round-off floor {floor:.3e}")


# --- theorem 1 -------------------------------------------------------------------


def _order_variant(sc: Scenario, orders) -> Scenario:
    plants, xi0 = [], []
    for i, r in enumerate(orders):
        plants.append(PlantSpec(r, 1, SinOfState(1.0), np.full(r, 0.5 * (-1) ** i)))
        x = np.zeros(r)
        x[0] = sc.xi0[i][0]
        xi0.append(x)
    return dataclasses.replace(sc, plants=tuple(plants), xi0=tuple(xi0), name=f"orders {tuple(orders)}")


def suite_theorem1() -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("theorem1")
    f = load_bundled("theorem1")
    keep = {"gamma(T) - x*", "fitted rate of |gamma - x*|", "x^s(T)"}
    runs = [(f.scenario.name, f.scenario)] + [
        (f"orders {o}", _order_variant(f.scenario, o)) for o in ((1, 1), (2, 2), (3, 3))
    ]
    for label, sc in runs:
        trace = integrate(sc)
        rep, rows = _verdict_rows(label, trace, f.analysis, keep)
        res.reports.append(rep)
        res.traces.append(trace)
        res.criteria += rows
    res.elapsed = time.perf_counter() - t0
    res.criteria.append(_runtime_row("theorem1", res.elapsed))
    return res


# --- theorem 2 -------------------------------------------------------------------


def isolated_node_schedule(num_nodes: int = 3, isolated: int = 2, weight: float = 3.0) -> SwitchingSchedule:
    """Cyclic schedule among all nodes but ``isolated``, which never sends or
    receives information; it fails joint strong connectivity."""
    others = [k for k in range(num_nodes) if k != isolated]
    graphs = []
    for a, b in zip(others, others[1:] + others[:1]):
        A = np.zeros((num_nodes, num_nodes))
        A[b, a] = weight
        graphs.append(A)
    return SwitchingSchedule(tuple(graphs), Periodic(tuple(range(len(graphs))), 1.0), float(len(graphs)))


def suite_theorem2() -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("theorem2")
    f = load_bundled("theorem2")
    sc = f.scenario
    jsc = is_jointly_strongly_connected(sc.schedule)
    res.criteria.append(check("bundled schedule jointly strongly connected", float(jsc.connected), 1.0, "=="))
    trace = integrate(sc)
    rep, rows = _verdict_rows(sc.name, trace, f.analysis)
    res.reports.append(rep)
    res.traces.append(trace)
    res.criteria += rows

    isolated = 2
    bad = dataclasses.replace(sc, schedule=isolated_node_schedule(sc.game.num_players, isolated),
                              name="isolated node")
    res.criteria.append(check("isolated node: schedule jointly strongly connected",
                              float(is_jointly_strongly_connected(bad.schedule).connected), 0.0, "=="))
    x_star = reference_ne(sc.game)
    bad_trace = integrate(bad, x_star=x_star)
    y_iso = bad_trace.z()[-1][isolated]
    res.traces.append(bad_trace)
    res.criteria.append(check(f"isolated node: estimate y_{isolated + 1}(T) - x*",
                              np.linalg.norm(y_iso - x_star), 1e-1, ">"))
    res.elapsed = time.perf_counter() - t0
    res.criteria.append(_runtime_row("theorem2", res.elapsed))
    return res


# --- theorem 3 -------------------------------------------------------------------

EULER_CHECK_HORIZON = 50.0


def suite_theorem3() -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("theorem3")
    f = load_bundled("theorem3")
    sc = f.scenario
    trace = integrate(sc)
    rep, rows = _verdict_rows(sc.name, trace, f.analysis)
    res.reports.append(rep)
    res.traces.append(trace)
    res.criteria += rows
    fine = integrate(_with_integration(sc, h=sc.integration.h / 2))
    res.traces.append(fine)
    v_scale = float(np.max(trace.monitors["V"]))
    res.criteria.append(_halving_row(sc.name, trace, fine, v_scale))
    # RK4 keeps V2 nonincreasing to round-off, which makes the check above
    # pass at the noise floor; explicit Euler shows the increments that do
    # come from discretization and that they shrink with h
    h = sc.integration.h
    euler = [integrate(_with_integration(sc, h=step, horizon=EULER_CHECK_HORIZON, method="euler"))
             for step in (h, h / 2)]
    res.criteria.append(_halving_row(f"{sc.name} euler cross-check", euler[0], euler[1], v_scale))
    res.elapsed = time.perf_counter() - t0
    res.criteria.append(_runtime_row("theorem3", res.elapsed))
    return res


# --- theorem 4 -------------------------------------------------------------------

HALVING_HORIZON = 20.0
SMOOTHING_EPSILON = 1e-3


def suite_theorem4() -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("theorem4")
    f = load_bundled("theorem4")
    sc = f.scenario
    exact = integrate(sc)
    rep, rows = _verdict_rows(f"{sc.name} exact-euler", exact, f.analysis)
    res.reports.append(rep)
    res.traces.append(exact)
    res.criteria += rows

    # the discretization tolerance on V shrinks with h
    h = sc.integration.h
    coarse = integrate(_with_integration(sc, h=2 * h, horizon=HALVING_HORIZON))
    fine = integrate(_with_integration(sc, h=h, horizon=HALVING_HORIZON))
    v_scale = float(np.max(exact.monitors["V"]))
    res.criteria.append(_halving_row(f"{sc.name} exact-euler", coarse, fine, v_scale))

    smooth_sc = dataclasses.replace(
        sc,
        controller=dataclasses.replace(sc.controller, sign_mode=Smoothed(SMOOTHING_EPSILON)),
        integration=dataclasses.replace(sc.integration, method="rk4"),
        name=f"{sc.name} smoothed-rk4",
    )
    smooth = integrate(smooth_sc)
    res.traces.append(smooth)
    err_exact = float(exact.monitors["dist_ne"][-1])
    err_smooth = float(smooth.monitors["dist_ne"][-1])
    res.criteria.append(check("smoothed-rk4 terminal NE error vs 2x exact-euler", err_smooth, 2 * err_exact,
                              detail=f"exact {err_exact:.3e}, smoothed {err_smooth:.3e}"))
    res.elapsed = time.perf_counter() - t0
    res.criteria.append(_runtime_row("theorem4", res.elapsed))
    return res


SUITES = {
    "theorem1": suite_theorem1,
    "theorem2": suite_theorem2,
    "theorem3": suite_theorem3,
    "theorem4": suite_theorem4,
}


def run_suites(name: str) -> list:
    names = SUITE_NAMES if name == "all" else (name,)
    return [SUITES[n]() for n in names]


def suite_text(results) -> str:
    lines = []
    for res in results:
        lines.append(f"[{res.name}] {'PASS' if res.passed else 'FAIL'} ({res.elapsed:.1f} s)")
        for c in res.criteria:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.4e} {c.relation} {c.threshold:.4e}"
                         + (f"  ({c.detail})" if c.detail else ""))
    lines.append("")
    lines.append(f"{'suite':<10} {'result':<6} {'criteria':>8} {'seconds':>8}")
    for res in results:
        lines.append(f"{res.name:<10} {'PASS' if res.passed else 'FAIL':<6} {len(res.criteria):>8} "
                     f"{res.elapsed:>8.1f}")
    return "\n".join(lines) + "\n"
