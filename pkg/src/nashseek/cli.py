"""Command-line front end.

    nashseek validate SCENARIO [--set key=value ...]
    nashseek run SCENARIO [--set key=value ...] [--out DIR] [--format text|csv|svg ...]
    nashseek suite {theorem1,theorem2,theorem3,theorem4,all} [--out DIR]
    nashseek sweep SCENARIO --delta GRID [--jobs N] [--out DIR]

Exit codes: 0 success, 1 a criterion failed, 2 invalid input, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from nashseek import analysis
from nashseek.errors import InputError, NashSeekError, ValidationError
from nashseek.files import atomic_write_text
from nashseek.graphs import is_jointly_strongly_connected
from nashseek.io import apply_overrides, parse_json, scenario_from_dict, write_trace
from nashseek.sim import game_certificate, integrate
from nashseek.suites import SUITE_NAMES, run_suites, suite_text

EXIT_OK = 0
EXIT_CRITERION = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3


class UsageError(InputError):
    pass


def _read_document(path, overrides, seed):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    doc = parse_json(text)
    if overrides:
        doc = apply_overrides(doc, overrides)
    if seed is not None and isinstance(doc, dict):
        for p in doc.get("plants") or []:
            dist = p.get("disturbance") if isinstance(p, dict) else None
            if isinstance(dist, dict) and dist.get("kind") == "PiecewiseConstantRandom":
                dist["seed"] = seed
    return doc


def _load(args, allow_zero_delta=False):
    doc = _read_document(args.scenario, args.set, args.seed)
    return scenario_from_dict(doc, allow_zero_delta=allow_zero_delta)


def parse_delta_grid(spec: str) -> list:
    """Comma-separated values, ``start:stop:num`` (linear) or
    ``log:start:stop:num`` (log-spaced)."""
    spec = spec.strip()
    try:
        if spec.startswith("log:"):
            a, b, n = spec[4:].split(":")
            grid = np.geomspace(float(a), float(b), int(n)).tolist()
        elif ":" in spec:
            a, b, n = spec.split(":")
            grid = np.linspace(float(a), float(b), int(n)).tolist()
        else:
            grid = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse delta grid {spec!r}: {exc}") from exc
    if not grid:
        raise UsageError("delta grid is empty")
    bad = [d for d in grid if not d > 0]
    if bad:
        raise UsageError(f"delta grid values must be positive, got {bad}")
    return grid


# --- commands -------------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        f = _load(args)
    except ValidationError as exc:
        for path, msg in exc.problems:
            print(f"error {path or '/'}: {msg}")
        return EXIT_INVALID
    sc = f.scenario
    cert = game_certificate(sc.game)
    psi = ", ".join(f"{v:.6g}" for v in cert.psi)
    kind = "estimate" if cert.is_estimate else "exact"
    print(f"mu = {cert.mu:.6g} ({kind})")
    print(f"psi = [{psi}]  (total {cert.psi_total:.6g})")
    status = EXIT_OK
    if sc.schedule is None:
        print("JSC: no communication schedule")
    else:
        rep = is_jointly_strongly_connected(sc.schedule)
        if rep.connected:
            print(f"JSC: true ({rep.windows_checked} windows checked)")
        else:
            a, b = rep.failing_window
            print(f"JSC: false (union over [{a:g}, {b:g}) is not strongly connected)")
            print("error /schedule: schedule is not jointly strongly connected")
            status = EXIT_INVALID
    if status == EXIT_OK:
        print(f"{args.scenario}: valid")
    return status


def cmd_run(args) -> int:
    f = _load(args)
    sc = f.scenario
    out = Path(args.out)
    stem = sc.name or Path(args.scenario).stem
    trace = integrate(sc)
    report = analysis.theorem_verdict(trace, config=f.analysis)
    csv_path, meta_path = write_trace(trace, out / f"{stem}_trace.csv", f.analysis)
    paths = analysis.emit_report([report], out, args.format or ["text"], traces=[trace], stem=f"{stem}_report")
    print(analysis.report_text([report]), end="")
    for p in (csv_path, meta_path, *paths):
        print(f"wrote {p}")
    return EXIT_OK if report.passed else EXIT_CRITERION


def cmd_suite(args) -> int:
    results = run_suites(args.name)
    text = suite_text(results)
    print(text, end="")
    out = Path(args.out)
    formats = args.format or ["text"]
    reports = [r for res in results for r in res.reports]
    if "text" in formats:
        print(f"wrote {atomic_write_text(out / 'suite_report.txt', text)}")
    if "csv" in formats:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suite", "criterion", "value", "relation", "threshold", "pass"])
        for res in results:
            for c in res.criteria:
                w.writerow([res.name, c.name, f"{c.value:.6e}", c.relation, f"{c.threshold:.6e}",
                            "true" if c.passed else "false"])
        print(f"wrote {atomic_write_text(out / 'suite_report.csv', buf.getvalue())}")
    if "svg" in formats:
        traces = [tr for res in results for tr in res.traces[:len(res.reports)]]
        for p in analysis.emit_report(reports, out, ["svg"], traces=traces, stem="suite"):
            print(f"wrote {p}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CRITERION


def cmd_sweep(args) -> int:
    grid = parse_delta_grid(args.delta)
    f = _load(args, allow_zero_delta=True)
    smap = analysis.delta_sweep(f.scenario, grid, jobs=args.jobs, tol_ne=f.analysis.tol_ne)
    print(analysis.stability_map_csv(smap), end="")
    best = smap.largest_converged
    print(f"largest converged delta: {best if best is not None else 'none'}")
    stem = f.scenario.name or Path(args.scenario).stem
    print(f"wrote {analysis.write_stability_map(smap, Path(args.out) / f'{stem}_stability_map.csv')}")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nashseek", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario JSON file")
            sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                            help="override a field, e.g. controller.delta=0.05 (repeatable)")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--format", action="append", choices=["text", "csv", "svg"],
                        help="report format (repeatable, default text)")
        sp.add_argument("--seed", type=int, default=None,
                        help="seed for random piecewise-constant disturbances")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    sp = sub.add_parser("validate", help="check a scenario and print mu, psi and the JSC verdict")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    sp = sub.add_parser("run", help="simulate a scenario and write trace and report")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("suite", help="run a theorem acceptance suite")
    sp.add_argument("name", choices=list(SUITE_NAMES) + ["all"])
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_suite)
    sp = sub.add_parser("sweep", help="sweep the step size delta and write a stability map")
    common(sp)
    sp.add_argument("--delta", required=True, metavar="GRID",
                    help="comma list, start:stop:num or log:start:stop:num")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except ValidationError as exc:
        for path, msg in exc.problems:
            print(f"error {path or '/'}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NashSeekError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
