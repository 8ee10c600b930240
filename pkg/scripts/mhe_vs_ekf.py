"""Paired MHE/EKF comparison: same layout, noise and initial error per seed."""

import argparse
import csv
import sys

import numpy as np

from coopnav.presets import estimator_comparison_scenario
from coopnav.sim import metrics, run_closed_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--max-steps", type=int)
    ap.add_argument("--csv", help="write per-seed rows here")
    args = ap.parse_args()

    rows = []
    for seed in range(args.seeds):
        sc = estimator_comparison_scenario(seed=seed)
        m = metrics(run_closed_loop(sc, "mhe", max_steps=args.max_steps))["mean_mse_m2"]
        e = metrics(run_closed_loop(sc, "ekf", max_steps=args.max_steps))["mean_mse_m2"]
        rows.append((seed, m, e))
        print(f"seed {seed:2d}  mhe {m:8.3f}  ekf {e:8.3f}  {'mhe' if m < e else 'ekf'}", flush=True)

    mhe, ekf = np.array([r[1] for r in rows]), np.array([r[2] for r in rows])
    print(f"MHE better on {int(np.sum(mhe < ekf))}/{len(rows)} seeds")
    print(f"median MSE: mhe {np.median(mhe):.3f}  ekf {np.median(ekf):.3f} m^2")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "mse_mhe_m2", "mse_ekf_m2"])
            w.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
