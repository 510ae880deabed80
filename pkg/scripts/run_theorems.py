"""Run the theorem suites and write text, CSV and SVG reports.

Usage: python scripts/run_theorems.py [theorem1 ... | all] [--out DIR]
"""

import argparse
import sys
from pathlib import Path

from nashseek.analysis import emit_report
from nashseek.files import atomic_write_text
from nashseek.suites import SUITE_NAMES, run_suites, suite_text


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("suites", nargs="*", default=["all"], choices=list(SUITE_NAMES) + ["all"])
    ap.add_argument("--out", default="out/theorems")
    args = ap.parse_args()

    names = SUITE_NAMES if "all" in args.suites else args.suites
    results = [r for name in names for r in run_suites(name)]
    text = suite_text(results)
    print(text, end="")
    out = Path(args.out)
    atomic_write_text(out / "suites.txt", text)
    for res in results:
        traces = res.traces[:len(res.reports)]
        emit_report(res.reports, out, ("text", "csv", "svg"), traces=traces, stem=res.name)
    print(f"reports in {out}/")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
