#!/usr/bin/env python3
"""Print the disentanglement and EPR thresholds in dimensionless units.

    python scripts/reproduce_thresholds.py [--json]
"""

import argparse
import json

from phasesep.bipartite import ROTATED_DIFFUSION_EXACT, ROTATED_DIFFUSION_NOMINAL
from phasesep.solver import epr_threshold, general_threshold, optimize_s, worst_case_epr


def collect() -> list[dict]:
    rows = []
    r = general_threshold(1.0)
    rows.append({"case": "general, s=1", "t_bar": r.t_bar, "factor": r.factor, "parameter": 1.0})
    s_star, r = optimize_s()
    rows.append({"case": "general, optimal s", "t_bar": r.t_bar, "factor": r.factor, "parameter": s_star})
    r = epr_threshold(1.0)
    rows.append({"case": "EPR, c=1", "t_bar": r.t_bar, "factor": r.factor, "parameter": 1.0})
    for name, kappa in (("nominal", ROTATED_DIFFUSION_NOMINAL), ("exact", ROTATED_DIFFUSION_EXACT)):
        c, r = worst_case_epr(rotated_diffusion=kappa)
        rows.append({"case": f"EPR worst case ({name} pair diffusion)", "t_bar": r.t_bar, "factor": r.factor, "parameter": c})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rows = collect()
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'case':40s} {'t_bar':>12s} {'factor':>10s} {'s or c':>10s}")
    for r in rows:
        print(f"{r['case']:40s} {r['t_bar']:12.7f} {r['factor']:10.5f} {r['parameter']:10.5f}")
    print("factor = t_bar * sqrt(2), i.e. the threshold in units of sqrt(hbar m / 2D)")


if __name__ == "__main__":
    main()
