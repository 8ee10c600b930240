"""Moving-horizon and extended Kalman estimators for stacked unicycle states.

The MHE is single-shooting: the only decision variable is the window's first
state, later states follow from the known turn rates through the Euler model,
so the dynamics constraint holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import step_array, step_jacobian, wrap_angle
from .nlp import SolveReport, SolverOptions, solve_nls
from .sensing import MeasurementSet, bearing_jacobian, bearing_model


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def arrival_cost_update(P, F, H, Q, Gamma) -> np.ndarray:
    """P' = Q + F (P - P H^T (H P H^T + Gamma)^-1 H P) F^T, symmetrized."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    H = np.asarray(H, dtype=float).reshape(-1, P.shape[0])
    if H.shape[0] == 0:
        post = P
    else:
        G = np.atleast_2d(np.asarray(Gamma, dtype=float))
        if G.shape != (H.shape[0], H.shape[0]):
            G = np.diag(np.broadcast_to(np.diag(G) if G.ndim == 2 and G.shape[0] > 1 else G.ravel()[0], (H.shape[0],)))
        S = H @ P @ H.T + G
        if np.linalg.cond(S) > 1e14:
            raise np.linalg.LinAlgError("singular innovation matrix")
        PHt = P @ H.T
        post = P - PHt @ np.linalg.solve(S, PHt.T)
    return symmetrize(Q + F @ post @ F.T)


# ---------------------------------------------------------------- stability


@dataclass(frozen=True)
class StabilityParams:
    c1: float
    c2: float
    c3: float
    k_f: float
    p: float
    delta: float
    r_mu: float

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "k_f", "p", "r_mu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    @property
    def contraction(self) -> float:
        return self.c1 * self.k_f * self.p / (self.p + self.c2 * self.delta)

    @property
    def beta(self) -> float:
        return self.c3 * self.r_mu / (self.p + self.c2 * self.delta)


@dataclass
class ZetaBound:
    sequence: np.ndarray
    a: float
    beta: float
    fixed_point: float | None

    @property
    def convergent(self) -> bool:
        return self.fixed_point is not None


def zeta_bound(params: StabilityParams, zeta0: float, n_steps: int) -> ZetaBound:
    """Iterate zeta <- a zeta + beta; a fixed point is reported only when a < 1."""
    if zeta0 < 0:
        raise ValueError("zeta0 must be >= 0")
    a, beta = params.contraction, params.beta
    seq = np.empty(n_steps + 1)
    seq[0] = zeta0
    for k in range(n_steps):
        seq[k + 1] = a * seq[k] + beta
    return ZetaBound(seq, a, beta, beta / (1.0 - a) if a < 1.0 else None)


# ---------------------------------------------------------------- EKF


@dataclass
class EkfState:
    x: np.ndarray  # (n, 3)
    P: np.ndarray  # (3n, 3n)

    def position_sigmas(self) -> np.ndarray:
        d = np.diag(self.P).reshape(-1, 3)
        return np.sqrt(np.maximum(d[:, :2], 0.0))


def _meas_arrays(meas: MeasurementSet | None):
    if meas is None or len(meas) == 0:
        e = np.zeros(0)
        return np.zeros(0, int), np.zeros(0, int), np.zeros((0, 2)), e, e
    return meas.bearing_arrays()


def ekf_step(state: EkfState, controls, measurements: MeasurementSet | None, Q, v, Ts: float) -> EkfState:
    """Predict with the Euler model (skipped if ``controls`` is None), then update.

    ``controls`` is ``omega`` (n,) or ``(omega, speed)`` with per-vehicle speeds.
    """
    x, P = state.x.copy(), state.P.copy()
    if controls is not None:
        omega, speed = controls if isinstance(controls, tuple) else (controls, v)
        F = step_jacobian(x, speed, Ts)
        x = step_array(x, np.asarray(omega, dtype=float), speed, Ts)
        P = symmetrize(F @ P @ F.T + Q)
    obs, tv, tp, z, var = _meas_arrays(measurements)
    if len(z):
        H = bearing_jacobian(x, obs, tv, tp)
        innov = wrap_angle(z - bearing_model(x, obs, tv, tp))
        S = H @ P @ H.T + np.diag(var)
        if np.linalg.cond(S) > 1e14:
            raise np.linalg.LinAlgError("singular innovation covariance")
        K = np.linalg.solve(S, H @ P).T
        flat = x.ravel() + K @ innov
        x = flat.reshape(-1, 3)
        x[:, 2] = wrap_angle(x[:, 2])
        IKH = np.eye(P.shape[0]) - K @ H
        P = symmetrize(IKH @ P @ IKH.T + K @ np.diag(var) @ K.T)
    return EkfState(x, P)


# ---------------------------------------------------------------- MHE


@dataclass
class MheWindow:
    horizon: int
    prior: np.ndarray  # (n, 3) estimate of the window's first state
    P: np.ndarray  # arrival-cost covariance of ``prior``
    Q: np.ndarray
    dt: float
    measurements: list = field(default_factory=list)
    # controls[k] moves the state from window index k to k + 1: (omega, speed)
    controls: list = field(default_factory=list)
    solution: np.ndarray | None = None  # last smoothed trajectory (len, n, 3)
    covariance: np.ndarray | None = None  # Gauss-Newton covariance of the first state
    evictions: int = 0
    report: SolveReport | None = None
    # "filtered": next prior is the first state corrected by its own bearings, then propagated.
    # "smoothed": next prior is the second state of the last solution.
    prior_mode: str = "filtered"

    def __len__(self) -> int:
        return len(self.measurements)

    @property
    def n(self) -> int:
        return self.prior.shape[0]


MIN_LINEARIZATION_RANGE = 1e-3


def _arrival_step(window: MheWindow, xs: np.ndarray):
    """Filtered prior and covariance for the second window state.

    The old prior is corrected with the first step's bearings and propagated one
    step, both linearized at ``xs`` (the smoothed first state). Using the
    smoothed second state instead would count the window's later bearings twice.
    """
    obs, tv, tp, z, var = window.measurements[0]
    if window.controls:
        omega0, speed0 = window.controls[0]
    else:
        omega0, speed0 = np.zeros(window.n), np.zeros(window.n)
    P = window.P
    post = window.prior.copy()
    if len(z):
        H = bearing_jacobian(xs, obs, tv, tp)
        # a bearing linearized within a millimetre of its target carries no usable gradient
        keep = np.abs(H).max(axis=1) < 1.0 / MIN_LINEARIZATION_RANGE
        H, z, var = H[keep], np.asarray(z)[keep], np.asarray(var)[keep]
        obs, tv, tp = (np.asarray(a)[keep] for a in (obs, tv, tp))
    if len(z):
        dx = _prior_error(window.prior, xs)
        innov = wrap_angle(z - bearing_model(xs, obs, tv, tp)) - H @ dx
        S = H @ P @ H.T + np.diag(var)
        K = np.linalg.solve(S, H @ P).T
        post = (window.prior.ravel() + K @ innov).reshape(-1, 3)
    else:
        H = np.zeros((0, P.shape[0]))
    F = step_jacobian(xs, speed0, window.dt)
    P_next = arrival_cost_update(P, F, H, window.Q, np.diag(var) if len(var) else np.zeros((0, 0)))
    return step_array(post, omega0, speed0, window.dt), P_next


def mhe_buffer_push(window: MheWindow, controls, measurements: MeasurementSet) -> MheWindow:
    """Append one step; past ``horizon + 1`` steps, evict the oldest.

    Eviction advances the prior and the arrival covariance by one filtered step.
    """
    if controls is not None and len(window.measurements) > 0:
        omega, speed = controls
        window.controls.append((np.asarray(omega, dtype=float), np.broadcast_to(np.asarray(speed, float), (window.n,)).copy()))
    window.measurements.append(_meas_arrays(measurements))
    if len(window.measurements) > window.horizon + 1:
        xs = window.solution[0] if window.solution is not None else window.prior
        nxt, window.P = _arrival_step(window, xs)
        if window.prior_mode == "smoothed" and window.solution is not None and len(window.solution) > 1:
            nxt = window.solution[1].copy()
        window.prior = nxt
        window.measurements.pop(0)
        window.controls.pop(0)
        window.solution = window.solution[1:] if window.solution is not None and len(window.solution) > 1 else None
        window.evictions += 1
    return window


def _rollout(x0: np.ndarray, controls, dt: float):
    """States over the window and the per-vehicle sensitivity terms d(x, y)/d psi_0."""
    L = len(controls) + 1
    n = x0.shape[0]
    X = np.empty((L, n, 3))
    X[0] = x0
    a = np.zeros((L, n))
    b = np.zeros((L, n))
    if L == 1:
        return X, a, b
    omega = np.array([c[0] for c in controls])
    speed = np.array([c[1] for c in controls])
    psi = x0[:, 2] + dt * np.concatenate((np.zeros((1, n)), np.cumsum(omega, axis=0)))
    vc = dt * speed * np.cos(psi[:-1])
    vs = dt * speed * np.sin(psi[:-1])
    X[1:, :, 0] = x0[:, 0] + np.cumsum(vc, axis=0)
    X[1:, :, 1] = x0[:, 1] + np.cumsum(vs, axis=0)
    X[:, :, 2] = psi
    a[1:] = -np.cumsum(vs, axis=0)
    b[1:] = np.cumsum(vc, axis=0)
    return X, a, b


def _prior_error(x: np.ndarray, prior: np.ndarray) -> np.ndarray:
    e = (x - prior).copy()
    e[:, 2] = wrap_angle(e[:, 2])
    return e.ravel()


class _MheProblem:
    def __init__(self, window: MheWindow):
        self.w = window
        Pc = np.linalg.cholesky(symmetrize(window.P))
        self.Linv = np.linalg.solve(Pc, np.eye(Pc.shape[0]))
        self._cache_x = None
        # every buffered bearing stacked once, tagged with its window index
        parts = [(np.full(len(m[3]), k), *m) for k, m in enumerate(window.measurements) if len(m[3])]
        if parts:
            self.ks, self.obs, self.tv, self.tp, self.val, var = (np.concatenate(c) for c in zip(*parts))
        else:
            self.ks = self.obs = self.tv = np.zeros(0, int)
            self.tp, self.val, var = np.zeros((0, 2)), np.zeros(0), np.zeros(0)
        self.sd = np.sqrt(var)

    def _eval(self, z: np.ndarray):
        if self._cache_x is not None and np.array_equal(z, self._cache_x):
            return self._cache
        w = self.w
        n = w.n
        x0 = z.reshape(-1, 3)
        X, a, b = _rollout(x0, w.controls, w.dt)
        ks, obs, tv = self.ks, self.obs, self.tv
        M = len(ks)
        po = X[ks, obs]
        veh = tv >= 0
        tgt = np.where(veh[:, None], X[ks, np.maximum(tv, 0), :2], self.tp)
        d = tgt - po[:, :2]
        R2 = np.einsum("ij,ij->i", d, d)
        res_m = wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - po[:, 2] - self.val) / self.sd
        gx, gy = d[:, 1] / R2, -d[:, 0] / R2
        # chain through d X_k / d X_0: heading columns pick up the a, b sensitivities
        J = np.zeros((M, 3 * n))
        rows = np.arange(M)
        J[rows, 3 * obs] = gx
        J[rows, 3 * obs + 1] = gy
        J[rows, 3 * obs + 2] = -1.0 + gx * a[ks, obs] + gy * b[ks, obs]
        r, t = rows[veh], tv[veh]
        J[r, 3 * t] = -gx[veh]
        J[r, 3 * t + 1] = -gy[veh]
        J[r, 3 * t + 2] = -(gx[veh] * a[ks[veh], t] + gy[veh] * b[ks[veh], t])
        J /= self.sd[:, None]
        res = np.concatenate((self.Linv @ _prior_error(x0, w.prior), res_m))
        self._cache_x = z.copy()
        self._cache = (res, np.vstack((self.Linv, J)), X)
        return self._cache

    def residual(self, z):
        return self._eval(z)[0]

    def jacobian(self, z):
        return self._eval(z)[1]

    def trajectory(self, z):
        return self._eval(z)[2]


MHE_OPTIONS = SolverOptions(max_iters=30, gradient_tolerance=1e-9, step_tolerance=1e-12, initial_damping=1e-4)


def mhe_cost(window: MheWindow, x0: np.ndarray) -> float:
    r = _MheProblem(window).residual(np.asarray(x0, dtype=float).ravel())
    return float(r @ r)


def mhe_estimate(window: MheWindow, opts: SolverOptions | None = None, x_init: np.ndarray | None = None):
    """Solve the window; returns (trajectory, next prior, next arrival covariance).

    The trajectory is also stored on the window and reused on eviction.
    """
    if len(window.measurements) == 0:
        raise ValueError("empty measurement window")
    opts = opts or MHE_OPTIONS
    prob = _MheProblem(window)
    if x_init is None:
        x_init = window.solution[0] if window.solution is not None else window.prior
    z0 = np.asarray(x_init, dtype=float).ravel().copy()
    # start from the prior itself when it fits at least as well
    if prob.residual(window.prior.ravel()) @ prob.residual(window.prior.ravel()) < prob.residual(z0) @ prob.residual(z0):
        z0 = window.prior.ravel().copy()
    rep = solve_nls(prob.residual, prob.jacobian, z0, opts=opts)
    X = prob.trajectory(rep.x).copy()
    X[:, :, 2] = wrap_angle(X[:, :, 2])
    J = prob.jacobian(rep.x)
    try:
        cov0 = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov0 = window.P.copy()
    window.solution = X
    window.covariance = symmetrize(cov0)
    window.report = rep
    nxt, P_next = _arrival_step(window, X[0])
    return X, nxt, P_next


def current_covariance(window: MheWindow) -> np.ndarray:
    """Covariance of the newest window state, mapped from the first-state covariance."""
    if window.solution is None or window.covariance is None:
        return window.P
    C = window.covariance
    if window.controls:
        _, a, b = _rollout(window.solution[0], window.controls, window.dt)
        Phi = np.eye(C.shape[0])
        for i in range(window.n):
            Phi[3 * i, 3 * i + 2] = a[-1, i]
            Phi[3 * i + 1, 3 * i + 2] = b[-1, i]
        C = Phi @ C @ Phi.T
    return symmetrize(C)


class MovingHorizonEstimator:
    """Stateful wrapper: ``update(controls, measurements)`` returns the newest estimate."""

    def __init__(self, x0: np.ndarray, P0: np.ndarray, Q: np.ndarray, dt: float, horizon: int, opts=None):
        self.window = MheWindow(horizon, np.array(x0, dtype=float), np.array(P0, dtype=float), np.array(Q, dtype=float), dt)
        self.opts = opts

    def update(self, controls, measurements: MeasurementSet) -> np.ndarray:
        mhe_buffer_push(self.window, controls, measurements)
        X, _, _ = mhe_estimate(self.window, self.opts)
        return X[-1].copy()

    def covariance(self) -> np.ndarray:
        return current_covariance(self.window)
