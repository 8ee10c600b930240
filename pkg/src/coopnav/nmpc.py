"""Receding-horizon planner trading goal progress against graph connectivity.

The horizon objective is

    J = dt * sum_k sum_i [ norm(C1_i)(k) + W_i(k) * norm(C2_i)(k) ]

with C1 the squared distance to goal, C2 the connectivity shortfall
(eta - lambda2)^2, and W_i switched on when the closed-form 3-sigma position
bound reaches sigma_c. Both series are min-max normalized per vehicle. By
default the min and range come from the warm-start rollout and stay fixed
during the solve; ``normalization="horizon"`` rescales every candidate over its
own horizon instead. Turn rates are held for ``control_block`` plant steps.

The gradient is analytic: W_i is piecewise constant, lambda2 is differentiated
through its eigenvector, and position sensitivities are pulled back through the
Euler rollout with suffix sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import sigma_p_bearing
from .nlp import SolveReport, SolverOptions, projected_gradient_norm, solve_box_min
from .world import Scenario

# extra reach when deciding which vehicles' terms a plan change can touch
COUPLING_MARGIN = 10.0
NMPC_OPTIONS = SolverOptions(max_iters=8, gradient_tolerance=1e-6, step_tolerance=1e-9, max_backtracks=6)


def c1_cost(position, destination) -> float:
    return float((position[0] - destination[0]) ** 2 + (position[1] - destination[1]) ** 2)


def c2_cost(lam, eta: float):
    lam = np.asarray(lam, dtype=float)
    out = np.where(lam >= eta, 0.0, (eta - lam) ** 2)
    return float(out) if out.ndim == 0 else out


def adaptive_weight(sigma_p, sigma_c: float, W: float):
    s = np.asarray(sigma_p, dtype=float)
    out = np.where(3.0 * s >= sigma_c, W, 0.0)
    return float(out) if out.ndim == 0 else out


def normalize_series(values) -> np.ndarray:
    """(v - min) / (max - min); a constant series maps to zeros."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty series")
    lo, hi = v.min(), v.max()
    if hi - lo <= 0.0:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def _normalized_sum_grad(c: np.ndarray, w: np.ndarray):
    """S = sum_k w_k norm(c)_k and dS/dc for one series."""
    a, b = int(np.argmin(c)), int(np.argmax(c))
    R = c[b] - c[a]
    if R <= 0.0:
        return 0.0, np.zeros_like(c)
    n = (c - c[a]) / R
    S = float(w @ n)
    g = w / R
    g[a] += (S - w.sum()) / R
    g[b] -= S / R
    return S, g


def _ref_range(c: np.ndarray) -> tuple[float, float]:
    lo, hi = float(c.min()), float(c.max())
    return lo, max(hi - lo, 1e-6 + 1e-3 * float(np.abs(c).max()))


@dataclass
class NmpcProblem:
    X0: np.ndarray  # (n, 3) current estimates
    destinations: np.ndarray  # (n, 2)
    landmarks: np.ndarray  # (nl, 2)
    scenario: Scenario
    active: np.ndarray | None = None  # vehicles still travelling
    sigma0: np.ndarray | None = None  # current position sigma per vehicle
    cooperation: bool = True
    warm_start: np.ndarray | None = None  # (n, n_blocks)
    # fixed (min, range) per vehicle for C1 and C2, shape (n, 2, 2); None
    # normalizes each candidate over its own horizon
    norm_ref: np.ndarray | None = None

    def __post_init__(self):
        n = self.X0.shape[0]
        self.X0 = np.asarray(self.X0, dtype=float)
        self.destinations = np.asarray(self.destinations, dtype=float).reshape(n, 2)
        self.landmarks = np.asarray(self.landmarks, dtype=float).reshape(-1, 2)
        if self.active is None:
            self.active = np.ones(n, dtype=bool)
        if self.sigma0 is None:
            self.sigma0 = np.zeros(n)

    @property
    def n(self) -> int:
        return self.X0.shape[0]

    @property
    def steps(self) -> int:
        return self.scenario.horizon_steps

    @property
    def n_blocks(self) -> int:
        return -(-self.steps // self.scenario.control_block)

    def bounds(self):
        s = self.scenario
        lo = np.where(self.active[:, None], s.omega_min, 0.0) * np.ones((self.n, self.n_blocks))
        hi = np.where(self.active[:, None], s.omega_max, 0.0) * np.ones((self.n, self.n_blocks))
        return lo.ravel(), hi.ravel()

    def initial_plan(self) -> np.ndarray:
        lo, hi = self.bounds()
        if self.warm_start is None:
            return np.zeros(self.n * self.n_blocks)
        return np.clip(np.asarray(self.warm_start, dtype=float).ravel(), lo, hi)


@dataclass
class CostBreakdown:
    c1: np.ndarray  # (steps, n)
    c2: np.ndarray
    lam: np.ndarray
    sigma_p: np.ndarray
    W: np.ndarray
    c1_norm: np.ndarray
    c2_norm: np.ndarray
    J: float

    @property
    def c2_contribution(self) -> float:
        return float(np.sum(self.W * self.c2_norm))


def rollout(problem: NmpcProblem, u: np.ndarray):
    """Expand block controls and roll the Euler model; returns (omega, psi, pos)."""
    s = problem.scenario
    H, n = problem.steps, problem.n
    U = np.asarray(u, dtype=float).reshape(n, problem.n_blocks)
    omega = np.repeat(U, s.control_block, axis=1)[:, :H]  # (n, H)
    speed = np.where(problem.active, s.speed, 0.0)
    psi = np.empty((n, H + 1))
    psi[:, 0] = problem.X0[:, 2]
    psi[:, 1:] = problem.X0[:, 2:3] + s.dt * np.cumsum(omega, axis=1)
    dx = s.dt * speed[:, None] * np.cos(psi[:, :H])
    dy = s.dt * speed[:, None] * np.sin(psi[:, :H])
    pos = np.empty((H, n, 2))
    pos[:, :, 0] = (problem.X0[:, 0:1] + np.cumsum(dx, axis=1)).T
    pos[:, :, 1] = (problem.X0[:, 1:2] + np.cumsum(dy, axis=1)).T
    return omega, psi, pos, speed


def _vehicle_terms(problem: NmpcProblem, i: int, nodes: np.ndarray, psi_i: np.ndarray, want_grad: bool):
    """lambda2 and predicted position sigma for vehicle ``i`` along the horizon.

    ``nodes`` is (H + 1, N, 2) starting at the current step: vehicles first, then
    landmarks. Returns lam (H,), sigma (H,) for steps 1..H, and a function
    mapping dlam (H,) to position gradients (H, n, 2).

    The closed-form sigma assumes unit bearing noise, so its scale is pinned to
    the estimator's current sigma; only its change along the horizon is used.
    """
    s = problem.scenario
    N = nodes.shape[1]
    n = problem.n
    rel = nodes - nodes[:, i : i + 1, :]
    dist = np.hypot(rel[..., 0], rel[..., 1])  # (H + 1, N)
    is_vehicle = np.arange(N) < n
    allowed = np.ones(N, dtype=bool)
    allowed[i] = False
    if not problem.cooperation:
        allowed &= ~is_vehicle
    member_all = (dist <= s.sensor_range) & allowed
    q_pos = s.q_diag[0] + s.q_diag[1]

    cnt = member_all.sum(axis=1)
    connected = cnt > 0
    if connected.any():
        Rg = np.where(member_all, dist, 0.0).sum(axis=1) / np.maximum(cnt, 1)
        th = np.arctan2(rel[..., 1], rel[..., 0])
        tg = np.arctan2(np.where(member_all, np.sin(th), 0).sum(1), np.where(member_all, np.cos(th), 0).sum(1))
        closed = sigma_p_bearing(np.maximum(Rg, 1e-9), psi_i, tg) ** 2
    else:
        closed = np.zeros(len(dist))
    sigma0 = float(problem.sigma0[i])
    cal2 = sigma0**2 / closed[0] if connected[0] and closed[0] > 0 else s.gamma
    t = np.arange(len(dist))
    last = np.maximum.accumulate(np.where(connected, t, -1))
    base = np.where(last >= 0, cal2 * closed[np.maximum(last, 0)], sigma0**2)
    since = np.where(last >= 0, t - last, t)
    sigma = np.sqrt(base + q_pos * since)[1:]

    nodes, member = nodes[1:], member_all[1:]
    H = nodes.shape[0]
    lam = np.zeros(H)
    cand = np.flatnonzero(member.any(axis=0))
    if cand.size == 0:
        return lam, sigma, None
    sub = np.concatenate(([i], cand))
    m = sub.size
    mem = np.concatenate((np.ones((H, 1), dtype=bool), member[:, cand]), axis=1)  # (H, m)
    P = nodes[:, sub, :]
    diff = P[:, :, None, :] - P[:, None, :, :]  # (H, m, m, 2)
    d = np.hypot(diff[..., 0], diff[..., 1])
    veh = is_vehicle[sub]
    kind_ok = ~(~veh[:, None] & ~veh[None, :])  # no landmark-landmark edges
    if not problem.cooperation:
        kind_ok &= ~(veh[:, None] & veh[None, :])
    np.fill_diagonal(kind_ok, False)
    edge = kind_ok[None] & mem[:, :, None] & mem[:, None, :] & (d <= s.sensor_range)
    scale = s.kappa / (s.sensor_range - s.rho)
    A = np.where(edge, np.exp(-scale * (d - s.rho)), 0.0)
    L = -A
    deg = A.sum(axis=2)
    big = 10.0 * (m + 1) * max(1.0, float(A.max(initial=0.0))) + 10.0
    diag = np.where(mem, deg, big)
    idx = np.arange(m)
    L[:, idx, idx] = diag
    n_mem = mem.sum(axis=1)
    if want_grad:
        ev, vec = np.linalg.eigh(L)
    else:
        ev, vec = np.linalg.eigvalsh(L), None
    lam = np.where(n_mem >= 2, ev[:, 1], 0.0)

    def pull(dlam: np.ndarray) -> np.ndarray:
        g = np.zeros((H, n, 2))
        use = (n_mem >= 2) & (dlam != 0.0)
        if not use.any():
            return g
        v = vec[:, :, 1]
        dv2 = (v[:, :, None] - v[:, None, :]) ** 2
        Gw = dv2 * (-scale) * A * dlam[:, None, None]
        Gw[~use] = 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(d[..., None] > 0, diff / d[..., None], 0.0)
        gp = np.einsum("hab,habk->hak", Gw, unit)  # (H, m, 2)
        for k, node in enumerate(sub):
            if node < n:
                g[:, node, :] += gp[:, k, :]
        return g

    return lam, sigma, pull


def nmpc_objective(u, problem: NmpcProblem, with_grad: bool = False, terms: np.ndarray | None = None):
    """Horizon cost of block controls ``u``; returns (J, breakdown[, gradient]).

    ``terms`` masks which vehicles' cost terms are summed (default: all active).
    """
    s = problem.scenario
    H, n = problem.steps, problem.n
    omega, psi, pos, speed = rollout(problem, u)
    if not np.all(np.isfinite(pos)):
        bad = int(np.argmax(~np.isfinite(pos).all(axis=(1, 2))))
        raise FloatingPointError(f"non-finite predicted state at step {bad}")
    nl = problem.landmarks.shape[0]
    pos0 = np.concatenate((problem.X0[None, :, :2], pos), axis=0)
    nodes = np.concatenate((pos0, np.broadcast_to(problem.landmarks, (H + 1, nl, 2))), axis=1)

    c1 = np.sum((pos - problem.destinations[None]) ** 2, axis=2)  # (H, n)
    c2 = np.zeros((H, n))
    lam = np.zeros((H, n))
    sig = np.zeros((H, n))
    Wt = np.zeros((H, n))
    c1n = np.zeros((H, n))
    c2n = np.zeros((H, n))
    gpos = np.zeros((H, n, 2))
    J = 0.0
    include = problem.active if terms is None else problem.active & terms
    for i in range(n):
        if not include[i]:
            continue
        lam_i, sig_i, pull = _vehicle_terms(problem, i, nodes, psi[i], with_grad)
        lam[:, i], sig[:, i] = lam_i, sig_i
        c2[:, i] = c2_cost(lam_i, s.eta)
        if s.weight_mode == "frozen":
            Wt[:, i] = adaptive_weight(problem.sigma0[i], s.sigma_c, s.weight)
        else:
            Wt[:, i] = adaptive_weight(sig_i, s.sigma_c, s.weight)
        if problem.norm_ref is None:
            S1, g1 = _normalized_sum_grad(c1[:, i], np.ones(H))
            S2, g2 = _normalized_sum_grad(c2[:, i], Wt[:, i].copy())
            c1n[:, i] = normalize_series(c1[:, i])
            c2n[:, i] = normalize_series(c2[:, i])
        else:
            (m1, r1), (m2, r2) = problem.norm_ref[i]
            c1n[:, i] = (c1[:, i] - m1) / r1
            c2n[:, i] = (c2[:, i] - m2) / r2
            S1, g1 = float(c1n[:, i].sum()), np.full(H, 1.0 / r1)
            S2, g2 = float(Wt[:, i] @ c2n[:, i]), Wt[:, i] / r2
        J += s.dt * (S1 + S2)
        if with_grad:
            gpos[:, i, :] += s.dt * g1[:, None] * 2.0 * (pos[:, i, :] - problem.destinations[i])
            if pull is not None:
                dlam = s.dt * g2 * np.where(lam_i < s.eta, -2.0 * (s.eta - lam_i), 0.0)
                gpos += pull(dlam)
    br = CostBreakdown(c1, c2, lam, sig, Wt, c1n, c2n, J)
    if not with_grad:
        return J, br
    # pull position gradients back to turn rates
    gx, gy = gpos[:, :, 0].T, gpos[:, :, 1].T  # (n, H): position at step t+1
    Sx = np.cumsum(gx[:, ::-1], axis=1)[:, ::-1]
    Sy = np.cumsum(gy[:, ::-1], axis=1)[:, ::-1]
    ps = psi[:, :H]
    dpsi = s.dt * speed[:, None] * (-np.sin(ps) * Sx + np.cos(ps) * Sy)  # d J / d psi_j
    tail = np.cumsum(dpsi[:, ::-1], axis=1)[:, ::-1]  # sum_{j >= l}
    domega = np.zeros((n, H))
    domega[:, :-1] = s.dt * tail[:, 1:]
    nb, Nc = problem.n_blocks, s.control_block
    pad = np.zeros((n, nb * Nc))
    pad[:, :H] = domega
    grad = pad.reshape(n, nb, Nc).sum(axis=2)
    grad[~problem.active] = 0.0
    return J, br, grad.ravel()


def shift_plan(u: np.ndarray, n: int, n_blocks: int, control_block: int, steps: int) -> np.ndarray:
    """Advance a block plan by one plant step, repeating the last entry."""
    U = np.asarray(u, dtype=float).reshape(n, n_blocks)
    fine = np.repeat(U, control_block, axis=1)[:, :steps]
    fine = np.concatenate((fine[:, 1:], fine[:, -1:]), axis=1)
    return fine[:, ::control_block][:, :n_blocks].ravel()


def reference_scales(problem: NmpcProblem, u: np.ndarray) -> np.ndarray:
    """Per-vehicle (min, range) of C1 and C2 along the rollout of ``u``."""
    saved, problem.norm_ref = problem.norm_ref, None
    try:
        _, br = nmpc_objective(u, problem)
    finally:
        problem.norm_ref = saved
    ref = np.empty((problem.n, 2, 2))
    for i in range(problem.n):
        ref[i, 0] = _ref_range(br.c1[:, i])
        ref[i, 1] = _ref_range(br.c2[:, i])
    return ref


def _coupled_terms(problem: NmpcProblem, u: np.ndarray, i: int) -> np.ndarray:
    """Vehicles whose cost terms can change with vehicle ``i``'s plan."""
    mask = np.zeros(problem.n, dtype=bool)
    mask[i] = True
    if problem.cooperation and problem.n > 1:
        _, _, pos, _ = rollout(problem, u)
        pos0 = np.concatenate((problem.X0[None, :, :2], pos), axis=0)
        d = np.hypot(*(pos0 - pos0[:, i : i + 1, :]).transpose(2, 0, 1))
        mask |= d.min(axis=0) <= problem.scenario.sensor_range + COUPLING_MARGIN
    return mask & problem.active


def nmpc_step(problem: NmpcProblem, opts: SolverOptions | None = None):
    """Minimize the joint horizon cost; returns (omega (n,), breakdown, report, plan).

    The vehicles' turn-rate blocks are optimized one after another with the
    others held fixed, each against only the cost terms it can influence. A
    joint first-order step would let one vehicle's weighted connectivity term
    swamp every other vehicle's goal term.

    With ``scenario.normalization == "reference"`` the min-max constants come
    from the warm-start rollout and stay fixed for the solve.
    """
    opts = opts or NMPC_OPTIONS
    lo, hi = problem.bounds()
    u0 = problem.initial_plan()
    nb = problem.n_blocks
    u = u0.copy()
    iters, reasons = 0, []
    try:
        if problem.scenario.normalization == "reference":
            problem.norm_ref = reference_scales(problem, u0)
        J0 = nmpc_objective(u0, problem)[0]
        for i in np.flatnonzero(problem.active):
            sl = slice(i * nb, (i + 1) * nb)
            terms = _coupled_terms(problem, u, i)

            def fg(x, sl=sl, terms=terms):
                w = u.copy()
                w[sl] = x
                J, _, g = nmpc_objective(w, problem, with_grad=True, terms=terms)
                return J, g[sl]

            rep = solve_box_min(None, fg, u[sl], lo[sl], hi[sl], opts)
            u[sl] = rep.x
            iters += rep.iterations
            reasons.append(rep.reason)
        J, br, g = nmpc_objective(u, problem, with_grad=True)
    except (FloatingPointError, np.linalg.LinAlgError, ValueError):
        u = u0
        J, br = nmpc_objective(u, problem)
        rep = SolveReport(u0, J, 0, "degraded", math.nan, [])
    else:
        reason = "converged" if all(r == "converged" for r in reasons) else (
            "stalled" if "stalled" in reasons else "max_iters"
        )
        rep = SolveReport(u, J, iters, reason, projected_gradient_norm(u, g, lo, hi), [J0, J])
    U = u.reshape(problem.n, nb)
    return U[:, 0].copy(), br, rep, u
