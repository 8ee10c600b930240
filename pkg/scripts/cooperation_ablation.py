"""Top-cluster landmark layout flown with and without vehicle-to-vehicle bearings."""

import argparse
from pathlib import Path

from coopnav.presets import cooperation_scenario
from coopnav.sim import export_traces, metrics, run_closed_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, help="export traces to OUT/on and OUT/off")
    args = ap.parse_args()

    sc = cooperation_scenario() if args.seed is None else cooperation_scenario(seed=args.seed)
    for label, coop in (("on", True), ("off", False)):
        res = run_closed_loop(sc, cooperation=coop)
        m = metrics(res)
        arrived = sum(a is not None for a in res.arrival_step)
        print(f"cooperation {label:3s}: total path {m['total_path_length_m']:7.1f} m, "
              f"arrived {arrived}/{sc.n_vehicles}, mean MSE {m['mean_mse_m2']:.3f} m^2")
        if args.out:
            export_traces(res, args.out / label)


if __name__ == "__main__":
    main()
