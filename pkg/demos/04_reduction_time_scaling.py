"""
How fast do two matter configurations separate?
================================================

Median reduction time of a two-branch superposition against the hit density
mu, the region V_delta where the branches differ, the hit width r and the
coupling J.  Each sweep covers one decade; the fitted log-log slopes should
come out near -1, -1, +2 and -4.
"""

from collapsesim.experiments import run_experiment

sweeps = {
    "mu": {"r": 3.0},
    "V_delta": {"r": 3.0, "V_delta_cells": 2},
    "r": {"r": 3.0},
    "J": {"r": 30.0, "J": 0.15, "mu": 0.05},
}

for sweep, extra in sweeps.items():
    res = run_experiment("scaling", {"sweep": sweep, "trials": 100, **extra}, seed=5)
    s = res.summary
    print(f"\n{sweep} sweep: slope {s['slope']:+.3f} +- {s['slope_stderr']:.3f} (expected {s['expected_slope']:+g})")
    for p in s["points"]:
        flag = "" if p["included"] else "  (excluded)"
        print(f"  {p['value']:10.4g}  median tau {p['median_tau']:12.4g}  reduced {p['reduced_fraction']:.2f}{flag}")
