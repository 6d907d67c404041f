#!/usr/bin/env python3
"""Compare grid-oracle moments with the closed-form evolution for random Gaussians.

    python scripts/oracle_vs_closed_form.py --states 5 --seed 1
"""

import argparse
import math
import time

import numpy as np

from phasesep.core import CovarianceMatrix2, GaussianState
from phasesep.dynamics import evolve
from phasesep.grid import WignerGrid, evolve_grid, moments, rasterize


def random_state(rng):
    while True:
        spp, sxx = rng.uniform(0.3, 1.0, size=2)
        spx = rng.uniform(-0.5, 0.5) * math.sqrt(spp * sxx)
        c = CovarianceMatrix2(spp, sxx, spx)
        if c.det >= 0.25:
            return GaussianState.single(c, rng.uniform(-1, 1, size=2))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--times", default="0.25,0.5,1.0")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    times = [float(t) for t in args.times.split(",")]
    print(f"{'state':>5s} {'t':>6s} {'cov_pp':>12s} {'cov_px':>12s} {'cov_xx':>12s} {'max rel err':>12s}")
    for i in range(args.states):
        s = random_state(rng)
        seen = []
        t0 = time.perf_counter()
        grid = rasterize(s, WignerGrid.empty(args.n, args.n))
        evolve_grid(grid, max(times), args.dt, sample_times=times, callback=lambda g: seen.append((g.t, moments(g))))
        for t, (_, cov) in seen:
            ref = evolve(s, t).cov
            sd = np.sqrt(np.diag(ref))
            err = np.max(np.abs(cov.matrix - ref) / np.outer(sd, sd))
            print(f"{i:5d} {t:6.3f} {cov.spp:12.6f} {cov.spx:12.6f} {cov.sxx:12.6f} {err:12.2e}")
        print(f"      ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
