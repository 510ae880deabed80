"""Step-size sweep for the bundled three-player consensus scenario.

Runs the bundled theorem2 scenario over a log-spaced grid of delta values and
writes the stability map.  Small delta converges slowly (the decay rate
scales with delta), so the sweep uses a longer horizon than the acceptance
run.
"""

import argparse
import dataclasses
import time
from pathlib import Path

import numpy as np

from nashseek.analysis import delta_sweep, stability_map_csv, write_stability_map
from nashseek.suites import load_bundled


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--lo", type=float, default=0.01)
    ap.add_argument("--hi", type=float, default=10.0)
    ap.add_argument("--num", type=int, default=13)
    ap.add_argument("--horizon", type=float, default=600.0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="out/theorem2_stability_map.csv")
    args = ap.parse_args()

    sc = load_bundled("theorem2").scenario
    sc = dataclasses.replace(sc, integration=dataclasses.replace(sc.integration, horizon=args.horizon))
    grid = np.geomspace(args.lo, args.hi, args.num)
    t0 = time.perf_counter()
    smap = delta_sweep(sc, grid, jobs=args.jobs)
    print(stability_map_csv(smap), end="")
    print(f"largest converged delta: {smap.largest_converged}")
    print(f"elapsed {time.perf_counter() - t0:.1f} s")
    print(f"wrote {write_stability_map(smap, Path(args.out))}")


if __name__ == "__main__":
    main()
