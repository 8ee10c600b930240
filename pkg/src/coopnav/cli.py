"""Command-line entry point: run, sweep, validate, oracle."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import presets
from .oracle import oracle_report
from .sim import export_traces, metrics, run_closed_loop, run_monte_carlo
from .world import INT_FIELDS, Scenario, ScenarioError, attr_for, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_ABORTED, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("coopnav")

PRESETS = {
    "three-vehicle": presets.three_vehicle_scenario,
    "estimator-comparison": presets.estimator_comparison_scenario,
    "cooperation": presets.cooperation_scenario,
    "connectivity": presets.connectivity_scenario,
}


def _load(spec: str) -> Scenario:
    """A YAML path or a ``preset:NAME`` reference."""
    if spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        if name not in PRESETS:
            raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        return PRESETS[name]()
    return load_scenario(Path(spec).read_text())


def _parse_value(attr: str, text: str):
    if attr in INT_FIELDS:
        return int(text)
    if attr in ("process_noise", "measurement_noise"):
        return text.lower() in ("1", "true", "on", "yes")
    if attr in ("weight_mode", "normalization"):
        return text
    return float(text)


def parse_grid(items: list[str]) -> dict:
    grid = {}
    for item in items or []:
        key, sep, values = item.partition("=")
        if not sep or not values:
            raise ScenarioError(f"bad --grid entry {item!r}, expected KEY=V1,V2")
        try:
            attr = attr_for(key.strip())
            grid[attr] = [_parse_value(attr, v.strip()) for v in values.split(",")]
        except KeyError:
            raise ScenarioError(f"unknown grid key {key!r}") from None
        except ValueError as exc:
            raise ScenarioError(f"bad value in --grid {item!r}: {exc}") from None
    return grid


def _cmd_run(args) -> int:
    sc = _load(args.scenario)
    if args.seed is not None:
        sc = sc.replace(seed=args.seed)
    res = run_closed_loop(sc, args.estimator, args.cooperation == "on", args.max_steps)
    if args.out:
        export_traces(res, args.out, args.format)
    met = metrics(res)
    print(json.dumps({k: met[k] for k in ("total_path_length_m", "mean_mse_m2", "last_arrival_s", "steps", "aborted")}))
    if res.aborted:
        log.error("run aborted: %s", res.abort_reason)
        return EXIT_ABORTED
    return EXIT_OK


def _cmd_sweep(args) -> int:
    sc = _load(args.scenario)
    grid = parse_grid(args.grid)
    first = sc.seed if args.seed is None else args.seed
    seeds = range(first, first + args.seeds)
    summaries = run_monte_carlo(
        sc, seeds, grid, args.estimator, args.cooperation == "on", args.max_steps, args.jobs
    )
    doc = [s.summary() | {"digests": s.digests, "runs": s.runs} for s in summaries]
    text = json.dumps(doc, indent=2, default=str)
    if args.out:
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "sweep.json").write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write sweep results to {out}: {exc}") from exc
    for s in summaries:
        print(json.dumps(s.summary(), default=str))
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = _load(args.scenario)
    sc.validate()
    print(f"ok: {sc.n_vehicles} vehicles, digest {sc.digest()}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    ok, text = oracle_report(args.draws, args.seed)
    print(text)
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopnav", description="Cooperative navigation simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_flags(sp):
        sp.add_argument("--scenario", required=True, help="YAML file or preset:NAME")
        sp.add_argument("--estimator", choices=("mhe", "ekf"), default="mhe")
        sp.add_argument("--cooperation", choices=("on", "off"), default="on")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--max-steps", type=int)

    run = sub.add_parser("run", help="one closed-loop simulation")
    sim_flags(run)
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="Monte-Carlo sweep over seeds and a parameter grid")
    sim_flags(sweep)
    sweep.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2")
    sweep.add_argument("--seeds", type=int, default=5)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.set_defaults(func=_cmd_sweep)

    val = sub.add_parser("validate", help="lint a scenario file")
    val.add_argument("scenario")
    val.set_defaults(func=_cmd_validate)

    orc = sub.add_parser("oracle", help="covariance/Gramian cross-checks")
    orc.add_argument("--draws", type=int, default=100)
    orc.add_argument("--seed", type=int, default=0)
    orc.set_defaults(func=_cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
