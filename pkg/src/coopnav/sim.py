"""Closed-loop simulation: sense, estimate, plan, step. Plus Monte-Carlo and export."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimation import EkfState, MovingHorizonEstimator, ekf_step
from .kinematics import step_array, wrap_angle
from .nlp import SolverOptions
from .nmpc import NmpcProblem, nmpc_step, shift_plan
from .rpmg import build_rpmg, lambda2, vehicle_laplacian
from .sensing import sense_all
from .world import RngStream, Scenario, place_landmarks

TRACE_VERSION = 1
P0_FLOOR = 1e-8


@dataclass
class RunResult:
    true_states: np.ndarray  # (T + 1, n, 3)
    est_states: np.ndarray  # (T + 1, n, 3)
    controls: np.ndarray  # (T, n)
    measurements: list  # rows (step, observer, target, value)
    planner_trace: list  # dict per planning step
    arrival_step: list  # per vehicle, int or None
    iteration_times: np.ndarray
    seed: int
    digest: str
    scenario: Scenario
    estimator: str = "mhe"
    cooperation: bool = True
    aborted: bool = False
    abort_reason: str = ""

    @property
    def steps(self) -> int:
        return self.controls.shape[0]

    @property
    def all_arrived(self) -> bool:
        return all(a is not None for a in self.arrival_step)


def graph_lambda2(x_hat: np.ndarray, s: Scenario, cooperation: bool) -> list[float]:
    """lambda2 of every vehicle's current measurement graph, built from the estimates."""
    g = build_rpmg(x_hat, s.landmarks, s.sensor_range, cooperation)
    return [lambda2(vehicle_laplacian(g, i, s.kappa, s.rho)[0]) for i in range(len(x_hat))]


def default_max_steps(s: Scenario) -> int:
    return int(math.ceil(3.0 * s.arena_diagonal / (s.speed * s.dt)))


def _position_sigma(C: np.ndarray, n: int) -> np.ndarray:
    d = np.maximum(np.diag(C).reshape(n, 3), 0.0)
    return np.sqrt(d[:, 0] + d[:, 1])


def run_closed_loop(
    scenario: Scenario,
    estimator: str = "mhe",
    cooperation: bool = True,
    max_steps: int | None = None,
    planner_opts: SolverOptions | None = None,
) -> RunResult:
    if estimator not in ("mhe", "ekf"):
        raise ValueError(f"unknown estimator {estimator!r}")
    s = scenario.validate()
    digest = s.digest()
    root = RngStream(s.seed)
    s = place_landmarks(s, root.child("placement"))
    meas_rng = root.child("measurement") if s.measurement_noise else None
    proc_rng = root.child("process")
    init_rng = root.child("initial_estimate")
    max_steps = default_max_steps(s) if max_steps is None else int(max_steps)

    n = s.n_vehicles
    X = np.array([v.source.as_array() for v in s.vehicles])
    dest = np.array([v.destination for v in s.vehicles], dtype=float)
    lm = np.array([(l.x, l.y) for l in s.landmarks], dtype=float).reshape(-1, 2)
    std = np.array([s.init_pos_std, s.init_pos_std, s.init_heading_std])
    x_hat = X + std * init_rng.standard_normal((n, 3))
    P0 = np.diag(np.tile(np.maximum(std**2, P0_FLOOR), n))
    Q = np.diag(np.tile(s.q_diag, n))
    if estimator == "mhe":
        est = MovingHorizonEstimator(x_hat, P0, Q, s.dt, s.mhe_horizon)
    else:
        ekf = EkfState(x_hat.copy(), P0.copy())

    trues, ests, ctrls, mlog, trace, times = [], [], [], [], [], []
    arrival: list = [None] * n
    plan = None
    last_ctrl = None
    aborted, reason = False, ""
    nb = -(-s.horizon_steps // s.control_block)
    for m in range(max_steps + 1):
        meas = sense_all(X, s.landmarks, s.sensor_range, s.gamma, meas_rng, m, cooperation)
        mlog.extend((m, it.observer, it.target, it.value) for it in meas.items)
        if estimator == "mhe":
            x_hat = est.update(last_ctrl, meas)
            cov = est.covariance()
        else:
            ekf = ekf_step(ekf, last_ctrl, meas, Q, s.speed, s.dt)
            x_hat, cov = ekf.x.copy(), ekf.P
        trues.append(X.copy())
        ests.append(x_hat.copy())
        err = np.hypot(*(x_hat[:, :2] - X[:, :2]).T)
        if not np.all(np.isfinite(err)) or err.max() > s.arena_diagonal:
            aborted, reason = True, f"estimator diverged at step {m}"
            break
        # a vehicle only knows its estimate, so arrival is declared on it
        for i in range(n):
            if arrival[i] is None and math.hypot(*(x_hat[i, :2] - dest[i])) <= s.goal_radius:
                arrival[i] = m
        active = np.array([a is None for a in arrival])
        if not active.any() or m == max_steps:
            break

        warm = None if plan is None else shift_plan(plan, n, nb, s.control_block, s.horizon_steps)
        problem = NmpcProblem(
            x_hat, dest, lm, s, active=active, sigma0=_position_sigma(cov, n),
            cooperation=cooperation, warm_start=warm,
        )
        t0 = time.perf_counter()
        omega, br, rep, plan = nmpc_step(problem, planner_opts)
        times.append(time.perf_counter() - t0)
        trace.append(
            {
                "step": m,
                "J": br.J,
                "lambda2": br.lam[0].tolist(),
                "lambda2_now": graph_lambda2(x_hat, s, cooperation),
                "sigma_p": br.sigma_p[0].tolist(),
                "W": br.W[0].tolist(),
                "omega": omega.tolist(),
                "c2_zero_where_connected": bool(np.all(br.c2[br.lam >= s.eta] == 0.0)),
                "iterations": rep.iterations,
                "status": rep.reason,
            }
        )
        speed = np.where(active, s.speed, 0.0)
        X = step_array(X, omega, speed, s.dt)
        if s.process_noise and s.q_diag[2] > 0:
            # heading disturbance only; travelled distance per step stays v * dt
            X[:, 2] += math.sqrt(s.q_diag[2]) * proc_rng.standard_normal(n) * active
            X[:, 2] = wrap_angle(X[:, 2])
        ctrls.append(omega.copy())
        last_ctrl = (omega.copy(), speed)

    return RunResult(
        true_states=np.array(trues),
        est_states=np.array(ests),
        controls=np.array(ctrls).reshape(-1, n),
        measurements=mlog,
        planner_trace=trace,
        arrival_step=arrival,
        iteration_times=np.array(times),
        seed=s.seed,
        digest=digest,
        scenario=s,
        estimator=estimator,
        cooperation=cooperation,
        aborted=aborted,
        abort_reason=reason,
    )


def path_lengths(true_states: np.ndarray) -> np.ndarray:
    d = np.diff(true_states[:, :, :2], axis=0)
    return np.hypot(d[..., 0], d[..., 1]).sum(axis=0)


def position_mse(true_states: np.ndarray, est_states: np.ndarray) -> np.ndarray:
    """Per-vehicle mean squared position error over the recorded steps."""
    e = est_states[:, :, :2] - true_states[:, :, :2]
    return np.mean(np.sum(e**2, axis=2), axis=0)


def metrics(result: RunResult) -> dict:
    pl = path_lengths(result.true_states)
    mse = position_mse(result.true_states, result.est_states)
    arr = result.arrival_step
    last = max(arr) * result.scenario.dt if all(a is not None for a in arr) else math.inf
    t = result.iteration_times
    return {
        "path_length_m": pl.tolist(),
        "total_path_length_m": float(pl.sum()),
        "mse_m2": mse.tolist(),
        "mean_mse_m2": float(mse.mean()),
        "arrival_step": list(arr),
        "last_arrival_s": last,
        "mean_iteration_s": float(t.mean()) if t.size else 0.0,
        "median_iteration_s": float(np.median(t)) if t.size else 0.0,
        "steps": result.steps,
        "aborted": result.aborted,
    }


# ---------------------------------------------------------------- Monte Carlo


def _median_iqr(values) -> dict:
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"median": math.nan, "iqr": math.nan, "n": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "iqr": float(q3 - q1), "n": int(v.size)}


@dataclass
class MonteCarloSummary:
    params: dict
    seeds: list[int]
    runs: list[dict] = field(default_factory=list)  # metrics per seed
    digests: list[str] = field(default_factory=list)
    failures: int = 0

    def stat(self, key: str) -> dict:
        ok = [r for r in self.runs if not r["aborted"]]
        return _median_iqr([r[key] for r in ok])

    def summary(self) -> dict:
        keys = ("mean_mse_m2", "total_path_length_m", "last_arrival_s", "median_iteration_s")
        return {"params": self.params, "seeds": self.seeds, "failures": self.failures, **{k: self.stat(k) for k in keys}}


def _one_run(args):
    scenario, seed, estimator, cooperation, max_steps, opts = args
    res = run_closed_loop(scenario.replace(seed=seed), estimator, cooperation, max_steps, opts)
    return res.digest, metrics(res)


def run_monte_carlo(
    base: Scenario,
    seeds,
    grid: dict | None = None,
    estimator: str = "mhe",
    cooperation: bool = True,
    max_steps: int | None = None,
    jobs: int = 1,
    planner_opts: SolverOptions | None = None,
) -> list[MonteCarloSummary]:
    """One summary per grid point (cartesian product of ``grid`` values)."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed required")
    if len(set(seeds)) != len(seeds):
        raise ValueError("duplicate seeds")
    grid = grid or {}
    keys = list(grid)
    points = [dict()]
    for k in keys:
        points = [dict(p, **{k: v}) for p in points for v in grid[k]]
    out = []
    for p in points:
        sc = base.replace(**p)
        tasks = [(sc, sd, estimator, cooperation, max_steps, planner_opts) for sd in seeds]
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_one_run, tasks))
        else:
            results = [_one_run(t) for t in tasks]
        summ = MonteCarloSummary(p, seeds)
        for dg, met in results:
            summ.digests.append(dg)
            summ.runs.append(met)
            summ.failures += int(met["aborted"])
        out.append(summ)
    return out


# ---------------------------------------------------------------- export

STATE_COLUMNS = ["step", "vehicle", "x_m", "y_m", "psi_rad"]


def _write_states(path: Path, states: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATE_COLUMNS)
        for k, row in enumerate(states):
            for i, (x, y, p) in enumerate(row):
                w.writerow([k, i, repr(float(x)), repr(float(y)), repr(float(p))])


def read_states(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return np.zeros((0, 0, 3))
    T = max(int(r["step"]) for r in rows) + 1
    n = max(int(r["vehicle"]) for r in rows) + 1
    out = np.empty((T, n, 3))
    for r in rows:
        out[int(r["step"]), int(r["vehicle"])] = (float(r["x_m"]), float(r["y_m"]), float(r["psi_rad"]))
    return out


def manifest(result: RunResult) -> dict:
    return {
        "trace_version": TRACE_VERSION,
        "scenario_digest": result.digest,
        "seed": result.seed,
        "estimator": result.estimator,
        "cooperation": result.cooperation,
        "steps": result.steps,
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
    }


def export_traces(result: RunResult, directory, fmt: str = "csv") -> list[Path]:
    """Write trajectories, planner trace, metrics and manifest; returns the paths.

    Wall-clock timings go to ``timing.json`` so the other files are reproducible.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        if fmt == "csv":
            for name, arr in (("true_states.csv", result.true_states), ("est_states.csv", result.est_states)):
                _write_states(out / name, arr)
                files.append(out / name)
            with open(out / "planner_trace.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["step", "vehicle", "J", "lambda2", "lambda2_now", "sigma_p_m", "W", "omega_radps", "iterations", "status"])
                for row in result.planner_trace:
                    for i in range(len(row["omega"])):
                        w.writerow([row["step"], i, repr(row["J"]), repr(row["lambda2"][i]), repr(row["lambda2_now"][i]),
                                    repr(row["sigma_p"][i]),
                                    repr(row["W"][i]), repr(row["omega"][i]), row["iterations"], row["status"]])
            files.append(out / "planner_trace.csv")
        else:
            doc = {
                "true_states": result.true_states.tolist(),
                "est_states": result.est_states.tolist(),
                "planner_trace": result.planner_trace,
            }
            (out / "traces.json").write_text(json.dumps(doc))
            files.append(out / "traces.json")
        met = metrics(result)
        timing = {k: met.pop(k) for k in ("mean_iteration_s", "median_iteration_s")}
        timing["iteration_s"] = result.iteration_times.tolist()
        timing["machine"] = {"python": platform.python_version(), "platform": platform.platform()}
        for name, doc in (("metrics.json", met), ("manifest.json", manifest(result)), ("timing.json", timing)):
            (out / name).write_text(json.dumps(doc, indent=2, default=str))
            files.append(out / name)
    except OSError as exc:
        raise OSError(f"cannot write traces to {out}: {exc}") from exc
    return files
