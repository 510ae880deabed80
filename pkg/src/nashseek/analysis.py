"""Verdicts, rate fits, boundedness checks, delta sweeps and reports.

Everything here reads finished traces together with an oracle equilibrium;
nothing reaches into controller internals.  Verdicts are pure functions of
their inputs, so rerunning the analysis on a stored trace reproduces the
same report.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from nashseek.control import Law
from nashseek.errors import InputError, SimulationDiverged
from nashseek.files import atomic_write_bytes, atomic_write_text
from nashseek.sim import Scenario, SimTrace, StateLayout, game_certificate, integrate, reference_ne

THEOREM_TAG = {
    Law.PERFECT_INFO: 1,
    Law.CONSENSUS: 2,
    Law.ADAPTIVE: 3,
    Law.DISTURBANCE: 4,
}

# terminal tolerances at the default horizons (T=20 for the perfect-information
# case, T=200 for the consensus-based laws, T=100 with disturbances)
DEFAULT_TOL_NE = {1: 1e-6, 2: 1e-3, 3: 1e-3, 4: 1e-2}

SIGNAL_FLOOR = 1e-14


@dataclass(frozen=True)
class AnalysisConfig:
    """Thresholds for :func:`theorem_verdict`.

    ``None`` fields take a default that depends on the theorem tag:

    * ``tol_ne`` from :data:`DEFAULT_TOL_NE`; ``tol_xs`` equals ``tol_ne``
      and also bounds x(T) - x* for the perfect-information law;
    * ``fit_window`` is [0.2 T, 0.8 T];
    * ``rate_max`` is -0.9 mu for the perfect-information law and is not
      checked otherwise;
    * ``v_rate_tol`` (largest allowed Lyapunov increase per unit time) is
      1e-6, except for the disturbance law where the sign term makes the
      discrete monitor increase at first order in h and the default is 20 h.
    """

    tol_ne: float | None = None
    tol_xs: float | None = None
    fit_window: tuple | None = None
    rate_max: float | None = None
    v_rate_tol: float | None = None
    bound_factor: float = 1e3
    trend_fraction: float = 0.2
    trend_slack: float = 0.1


@dataclass(frozen=True)
class Criterion:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<="
    detail: str = ""


def check(name: str, value: float, threshold: float, relation: str = "<=", detail: str = "") -> Criterion:
    value = float(value)
    threshold = float(threshold)
    if relation == "<=":
        ok = value <= threshold
    elif relation == ">=":
        ok = value >= threshold
    elif relation == "<":
        ok = value < threshold
    elif relation == ">":
        ok = value > threshold
    elif relation == "==":
        ok = value == threshold
    else:
        raise InputError(f"unknown relation {relation!r}")
    return Criterion(name, value, threshold, bool(ok and math.isfinite(value)), relation, detail)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    window: tuple


@dataclass(frozen=True)
class ConvergenceReport:
    name: str
    theorem_tag: int
    terminal_ne_error: float
    fitted_rate: float
    fit_r2: float
    criteria: tuple
    bounded: dict = field(default_factory=dict)
    monitors: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)


# --- rate fits and boundedness ------------------------------------------------------


def _signal(trace: SimTrace, signal) -> np.ndarray:
    if isinstance(signal, str):
        return np.asarray(trace.column(signal), dtype=float)
    if callable(signal):
        return np.asarray(signal(trace), dtype=float)
    values = np.asarray(signal, dtype=float)
    if values.shape != trace.t.shape:
        raise InputError(f"signal has shape {values.shape}, trace has {trace.t.shape}")
    return values


def fit_exponential_rate(trace: SimTrace, signal="gamma_ne", window: tuple | None = None,
                         floor: float = SIGNAL_FLOOR) -> RateFit:
    """Least-squares slope of log(signal) against t over ``window``.

    ``signal`` is a trace column name, a callable on the trace or an array
    aligned with ``trace.t``.  Values are floored at ``floor`` before the log.
    """
    t = trace.t
    values = _signal(trace, signal)
    T0, T1 = float(t[0]), float(t[-1])
    if window is None:
        span = T1 - T0
        window = (T0 + 0.2 * span, T0 + 0.8 * span)
    ta, tb = map(float, window)
    tol = 1e-9 * max(1.0, abs(T1))
    if not (T0 - tol <= ta < tb <= T1 + tol):
        raise InputError(f"fit window [{ta:g}, {tb:g}] is not inside the trace span [{T0:g}, {T1:g}]")
    mask = (t >= ta - tol) & (t <= tb + tol)
    if np.count_nonzero(mask) < 2:
        raise InputError("fit window contains fewer than two samples")
    x = t[mask]
    y = np.log(np.maximum(values[mask], floor))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, (ta, tb))


def is_bounded(t: np.ndarray, values: np.ndarray, factor: float = 1e3, fraction: float = 0.2,
               slack: float = 0.1) -> tuple:
    """Finite-horizon boundedness test.

    A nonnegative signal counts as bounded when its supremum stays below
    ``factor * (initial + 1)`` and the least-squares trend over the final
    ``fraction`` of the horizon rises by at most ``slack * (sup + 1)``.
    Returns ``(ok, sup, rise)``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return True, 0.0, 0.0
    if not np.all(np.isfinite(values)):
        return False, math.inf, math.inf
    sup = float(values.max())
    t = np.asarray(t, dtype=float)
    start = t[-1] - fraction * (t[-1] - t[0])
    tail = t >= start
    rise = 0.0
    if np.count_nonzero(tail) >= 2 and t[-1] > start:
        slope = np.polyfit(t[tail], values[tail], 1)[0]
        rise = float(slope * (t[-1] - start))
    ok = sup <= factor * (float(values[0]) + 1.0) and rise <= slack * (sup + 1.0)
    return bool(ok), sup, rise


# --- verdicts -----------------------------------------------------------------------


def _xi_norms(trace: SimTrace) -> np.ndarray:
    L = StateLayout(trace.scenario.game, trace.scenario.plants, trace.law)
    idx = np.concatenate([np.arange(sl.start, sl.stop) for sl in L.xi])
    return np.linalg.norm(trace.states[:, idx], axis=1)


def theorem_verdict(trace: SimTrace, scenario: Scenario | None = None, oracle_ne: np.ndarray | None = None,
                    config: AnalysisConfig | None = None) -> ConvergenceReport:
    """Check the limit statements the scenario's law is expected to deliver."""
    sc = trace.scenario if scenario is None else scenario
    cfg = AnalysisConfig() if config is None else config
    x_star = trace.x_star if oracle_ne is None else np.asarray(oracle_ne, dtype=float)
    tag = THEOREM_TAG[sc.law]
    tol = DEFAULT_TOL_NE[tag] if cfg.tol_ne is None else cfg.tol_ne
    tol_xs = tol if cfg.tol_xs is None else cfg.tol_xs
    t = trace.t
    T = float(t[-1])

    gamma = trace.gammas()
    x = trace.actions()
    gamma_err = np.linalg.norm(gamma - x_star, axis=1)
    x_err = float(np.linalg.norm(x[-1] - x_star))
    crit = []
    if tag != 2:
        crit.append(check("gamma(T) - x*", gamma_err[-1], tol))
    # with perfect information x trails gamma through the x^s transient
    crit.append(check("x(T) - x*", x_err, tol_xs if tag == 1 else tol))
    if tag != 2:
        crit.append(check("x^s(T)", np.linalg.norm(trace.x_s()[-1]), tol_xs))
    if tag != 1:
        z = trace.z()[-1].reshape(sc.game.num_players, sc.game.n)
        label = "y(T) - 1 x x*" if tag == 2 else "z(T) - 1 x x*"
        crit.append(check(label, np.linalg.norm(z - x_star[None, :]), tol))

    fit = fit_exponential_rate(trace, gamma_err, cfg.fit_window)
    if tag == 1:
        rate_max = cfg.rate_max
        if rate_max is None:
            rate_max = -0.9 * game_certificate(sc.game).mu
        crit.append(check("fitted rate of |gamma - x*|", fit.slope, rate_max,
                          detail=f"r2={fit.r2:.6f} window=[{fit.window[0]:g}, {fit.window[1]:g}]"))

    stats = dict(trace.stats)
    monitors = {k: stats[k] for k in ("v_max_increase_rate", "v_max_increment", "d_hat_violations",
                                      "chatter_rate") if k in stats}
    if tag != 2 and "v_max_increase_rate" in stats:
        v_tol = cfg.v_rate_tol
        if v_tol is None:
            v_tol = 20.0 * sc.integration.h if tag == 4 else 1e-6
        crit.append(check("max V increase per unit time", stats["v_max_increase_rate"], v_tol))

    bounded = {}
    opts = dict(factor=cfg.bound_factor, fraction=cfg.trend_fraction, slack=cfg.trend_slack)
    if tag in (3, 4):
        series = {"theta_tilde": trace.monitors["theta_err"], "xi": _xi_norms(trace)}
        if tag == 4:
            series["D_tilde"] = trace.monitors["D_err"]
        for key, values in series.items():
            ok, sup, rise = is_bounded(t, values, **opts)
            bounded[key] = ok
            crit.append(Criterion(f"{key} bounded", sup, cfg.bound_factor * (float(values[0]) + 1.0), ok,
                                  "<=", f"final-window rise {rise:.3e}"))
    if tag == 4:
        viol = int(stats.get("d_hat_violations", 0))
        dh = trace.d_hat()
        recorded = int(np.count_nonzero(np.diff(dh, axis=0) < 0))
        crit.append(check("D_hat decreases", viol + recorded, 0, "==",
                          detail="every step checked during integration plus recorded samples"))

    return ConvergenceReport(
        name=sc.name,
        theorem_tag=tag,
        terminal_ne_error=x_err,
        fitted_rate=fit.slope,
        fit_r2=fit.r2,
        criteria=tuple(crit),
        bounded=bounded,
        monitors={**monitors, "horizon": T},
    )


# --- delta sweeps -------------------------------------------------------------------

CONVERGED = "converged"
BOUNDED = "bounded-nonconverged"
DIVERGED = "diverged"


@dataclass(frozen=True)
class SweepRow:
    delta: float
    status: str
    terminal_ne_error: float
    initial_ne_error: float


@dataclass(frozen=True)
class StabilityMap:
    rows: tuple
    tol_ne: float

    @property
    def largest_converged(self) -> float | None:
        good = [r.delta for r in self.rows if r.status == CONVERGED]
        return max(good) if good else None


def _sweep_point(args):
    template, delta, tol, factor = args
    sc = dataclasses.replace(template, controller=dataclasses.replace(template.controller, delta=float(delta)))
    x_star = reference_ne(sc.game)
    try:
        trace = integrate(sc, allow_zero_delta=True, x_star=x_star)
    except SimulationDiverged:
        return SweepRow(float(delta), DIVERGED, math.inf, math.nan)
    err = trace.monitors["dist_ne"]
    final, first = float(err[-1]), float(err[0])
    if final <= tol:
        status = CONVERGED
    elif final > factor * (first + 1.0):
        status = DIVERGED
    else:
        status = BOUNDED
    return SweepRow(float(delta), status, final, first)


def delta_sweep(template: Scenario, deltas: Sequence[float], jobs: int = 1, tol_ne: float | None = None,
                bound_factor: float = 1e3) -> StabilityMap:
    """Run ``template`` at every step size in ``deltas``.

    Each run is classified by its terminal NE distance: converged when it is
    within ``tol_ne``, diverged when the run produced a non-finite state or
    the distance grew beyond ``bound_factor * (initial + 1)``, bounded but
    not converged otherwise.  Rows follow the order of ``deltas`` whatever
    the number of worker processes.
    """
    if tol_ne is None:
        tol_ne = DEFAULT_TOL_NE[THEOREM_TAG[template.law]]
    tasks = [(template, float(d), tol_ne, bound_factor) for d in deltas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(a) for a in tasks]
    return StabilityMap(tuple(rows), tol_ne)


# --- reports ------------------------------------------------------------------------

REPORT_COLUMNS = ["scenario", "theorem", "criterion", "value", "relation", "threshold", "pass"]


def _report_rows(reports):
    for rep in reports:
        for c in rep.criteria:
            yield [rep.name, rep.theorem_tag, c.name, f"{c.value:.6e}", c.relation, f"{c.threshold:.6e}",
                   "true" if c.passed else "false"]


def report_text(reports: Sequence[ConvergenceReport]) -> str:
    lines = [f"{'scenario':<24} {'thm':>3}  {'criterion':<30} {'value':>13}    {'threshold':>12}  result"]
    for rep in reports:
        for c in rep.criteria:
            lines.append(f"{rep.name:<24} {rep.theorem_tag:>3}  {c.name:<30} {c.value:>13.6e} {c.relation:>2} "
                         f"{c.threshold:>12.6e}  {'PASS' if c.passed else 'FAIL'}")
    if reports:
        total = sum(len(r.criteria) for r in reports)
        failed = sum(not c.passed for r in reports for c in r.criteria)
        lines.append(f"{total - failed}/{total} criteria passed")
    return "\n".join(lines) + "\n"


def report_csv(reports: Sequence[ConvergenceReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    w.writerows(_report_rows(reports))
    return buf.getvalue()


def stability_map_csv(smap: StabilityMap) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "status", "terminal_ne_error", "initial_ne_error"])
    for r in smap.rows:
        w.writerow([f"{r.delta:.6g}", r.status, f"{r.terminal_ne_error:.6e}", f"{r.initial_ne_error:.6e}"])
    return buf.getvalue()


def write_stability_map(smap: StabilityMap, path) -> Path:
    return atomic_write_text(path, stability_map_csv(smap))


def trace_figure_svg(trace: SimTrace, title: str = "") -> bytes:
    """Line charts of the NE distance, the Lyapunov monitor and D_hat."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    panels = [("NE distance", True), ("Lyapunov monitor", False)]
    if trace.law is Law.DISTURBANCE:
        panels.append(("D_hat", False))
    with plt.rc_context({"svg.hashsalt": "nashseek", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(len(panels), 1, figsize=(6, 2.2 * len(panels)), sharex=True)
        t = trace.t
        ax = axes[0]
        ax.semilogy(t, np.maximum(trace.monitors["dist_ne"], SIGNAL_FLOOR), label="|x - x*|")
        ax.semilogy(t, np.maximum(trace.monitors["gamma_ne"], SIGNAL_FLOOR), label="|gamma - x*|", ls="--")
        ax.legend(loc="upper right", fontsize=8)
        ax.set_ylabel("NE distance")
        if title:
            ax.set_title(title)
        ax = axes[1]
        if "V" in trace.monitors:
            ax.plot(t, trace.monitors["V"])
        ax.set_ylabel("V")
        if len(panels) > 2:
            ax = axes[2]
            dh = trace.d_hat()
            for i in range(dh.shape[1]):
                ax.plot(t, dh[:, i], label=f"player {i + 1}")
            ax.legend(loc="lower right", fontsize=8)
            ax.set_ylabel("D_hat")
        axes[-1].set_xlabel("t")
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def emit_report(reports: Sequence[ConvergenceReport], out_dir, formats: Sequence[str] = ("text",),
                traces: Sequence[SimTrace] | None = None, stem: str = "report") -> list:
    """Write the summary table in each requested format and return the paths.

    ``svg`` needs the traces the reports were computed from (one per report).
    """
    out = Path(out_dir)
    paths = []
    for fmt in formats:
        if fmt == "text":
            paths.append(atomic_write_text(out / f"{stem}.txt", report_text(reports)))
        elif fmt == "csv":
            paths.append(atomic_write_text(out / f"{stem}.csv", report_csv(reports)))
        elif fmt == "svg":
            if traces is None or len(traces) != len(reports):
                raise InputError("svg output needs one trace per report")
            for k, (rep, tr) in enumerate(zip(reports, traces)):
                name = rep.name or f"run{k}"
                data = trace_figure_svg(tr, f"{name} (theorem {rep.theorem_tag})")
                fname = f"{stem}.svg" if len(reports) == 1 else f"{stem}_{_slug(name)}.svg"
                paths.append(atomic_write_bytes(out / fname, data))
        else:
            raise InputError(f"unknown report format {fmt!r}")
    return paths
