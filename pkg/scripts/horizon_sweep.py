"""Planner horizon sweep: per-iteration time and last-arrival time versus tau_h."""

import argparse
import json

from coopnav.presets import three_vehicle_scenario
from coopnav.sim import run_monte_carlo


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizons", default="1,5,15,25", help="comma-separated seconds")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--json", help="write the summaries here")
    args = ap.parse_args()

    taus = [float(t) for t in args.horizons.split(",")]
    out = run_monte_carlo(three_vehicle_scenario(), range(args.seeds), {"horizon": taus}, jobs=args.jobs)
    print(f"{'tau_h':>6} {'iter s':>8} {'arrival s':>10} {'path m':>8}")
    for s in out:
        print(
            f"{s.params['horizon']:6.0f} {s.stat('median_iteration_s')['median']:8.3f}"
            f" {s.stat('last_arrival_s')['median']:10.1f} {s.stat('total_path_length_m')['median']:8.1f}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([s.summary() for s in out], fh, indent=2, default=str)


if __name__ == "__main__":
    main()
