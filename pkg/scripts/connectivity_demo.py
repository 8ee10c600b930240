"""Two vehicles that must close on a shared landmark to keep connectivity."""

import argparse

from coopnav.presets import connectivity_scenario
from coopnav.sim import run_closed_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-steps", type=int, default=200)
    args = ap.parse_args()

    res = run_closed_loop(connectivity_scenario(), max_steps=args.max_steps)
    for row in res.planner_trace[:: max(1, len(res.planner_trace) // 10)] + res.planner_trace[-1:]:
        lam = " ".join(f"{v:6.3f}" for v in row["lambda2_now"])
        sig = " ".join(f"{v:6.2f}" for v in row["sigma_p"])
        print(f"step {row['step']:4d}  lambda2 {lam}  sigma_p {sig}")
    print("arrival steps:", res.arrival_step)


if __name__ == "__main__":
    main()
