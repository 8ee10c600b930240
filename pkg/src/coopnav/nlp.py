"""Box-constrained Levenberg-Marquardt and projected-gradient solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 100
    gradient_tolerance: float = 1e-8
    step_tolerance: float = 1e-12
    initial_damping: float = 1e-3
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.gradient_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    iterations: int
    reason: str  # converged | max_iters | stalled
    gradient_norm: float
    history: list[float]

    @property
    def converged(self) -> bool:
        return self.reason == "converged"


def _box(lower, upper, n):
    lo = np.full(n, -np.inf) if lower is None else np.broadcast_to(np.asarray(lower, float), (n,))
    hi = np.full(n, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, float), (n,))
    return lo, hi


def projected_gradient_norm(x, g, lo, hi) -> float:
    return float(np.linalg.norm(np.clip(x - g, lo, hi) - x))


def solve_nls(residual, jacobian, x0, lower=None, upper=None, opts: SolverOptions | None = None) -> SolveReport:
    """Minimize 0.5 ||r(x)||^2 over a box with projected LM steps.

    Damping is divided by 10 on an accepted step and multiplied by 10 on a
    rejected one. A zero initial damping gives plain Gauss-Newton steps.
    """
    opts = opts or SolverOptions()
    x = np.array(x0, dtype=float)
    lo, hi = _box(lower, upper, x.size)
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("x0 violates the bounds")
    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite residual at x0")
    J = np.asarray(jacobian(x), dtype=float)
    if J.shape != (r.size, x.size):
        raise ValueError(f"jacobian shape {J.shape} != {(r.size, x.size)}")
    f = 0.5 * float(r @ r)
    mu = opts.initial_damping
    history = [f]
    reason = "max_iters"
    it = 0
    g = J.T @ r
    for it in range(1, opts.max_iters + 1):
        gnorm = projected_gradient_norm(x, g, lo, hi)
        if gnorm <= opts.gradient_tolerance:
            reason, it = "converged", it - 1
            break
        JtJ = J.T @ J
        accepted = False
        while mu <= 1e16:
            A = JtJ + mu * np.diag(np.maximum(np.diag(JtJ), 1e-12)) if mu > 0 else JtJ
            try:
                step = np.linalg.solve(A, -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(A, -g, rcond=None)[0]
            x_new = np.clip(x + step, lo, hi)
            r_new = np.asarray(residual(x_new), dtype=float)
            f_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if f_new <= f:
                accepted = True
                break
            mu = max(mu * 10.0, 1e-8)
        if not accepted:
            reason = "stalled"
            break
        dx = np.linalg.norm(x_new - x)
        x, r, f = x_new, r_new, f_new
        history.append(f)
        J = np.asarray(jacobian(x), dtype=float)
        g = J.T @ r
        mu = mu / 10.0
        if dx <= opts.step_tolerance * (1.0 + np.linalg.norm(x)):
            gnorm = projected_gradient_norm(x, g, lo, hi)
            reason = "converged" if gnorm <= opts.gradient_tolerance else "stalled"
            break
    gnorm = projected_gradient_norm(x, g, lo, hi)
    if reason == "max_iters" and gnorm <= opts.gradient_tolerance:
        reason = "converged"
    return SolveReport(x, f, it, reason, gnorm, history)


def solve_box_min(cost, gradient, x0, lower=None, upper=None, opts: SolverOptions | None = None) -> SolveReport:
    """Projected gradient with Armijo backtracking on the projection arc.

    Trial steps start from a Barzilai-Borwein length; acceptance is the usual
    sufficient-decrease test, so accepted costs never increase.
    ``gradient`` may return ``(cost, grad)`` when ``cost`` is None.
    """
    opts = opts or SolverOptions()
    x = np.array(x0, dtype=float)
    lo, hi = _box(lower, upper, x.size)
    x = np.clip(x, lo, hi)

    def fg(z):
        if cost is None:
            fz, gz = gradient(z)
            return float(fz), np.asarray(gz, dtype=float)
        return float(cost(z)), np.asarray(gradient(z), dtype=float)

    f, g = fg(x)
    if not np.isfinite(f):
        raise ValueError("non-finite cost at x0")
    history = [f]
    alpha = 1.0 / max(np.linalg.norm(g, np.inf), 1e-12)
    reason = "max_iters"
    it = 0
    for it in range(1, opts.max_iters + 1):
        gnorm = projected_gradient_norm(x, g, lo, hi)
        if gnorm <= opts.gradient_tolerance:
            reason, it = "converged", it - 1
            break
        a = alpha
        for _ in range(opts.max_backtracks):
            x_new = np.clip(x - a * g, lo, hi)
            d = x_new - x
            f_new, g_new = fg(x_new)
            if np.isfinite(f_new) and f_new <= f + opts.armijo * float(g @ d):
                break
            a *= opts.backtrack
        else:
            reason = "stalled"
            break
        s, y = x_new - x, g_new - g
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if np.linalg.norm(s) <= opts.step_tolerance * (1.0 + np.linalg.norm(x)):
            reason = "converged" if projected_gradient_norm(x, g, lo, hi) <= opts.gradient_tolerance else "stalled"
            break
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 1e-300 else a * 2.0
        alpha = min(max(alpha, 1e-10), 1e10)
    gnorm = projected_gradient_norm(x, g, lo, hi)
    if reason == "max_iters" and gnorm <= opts.gradient_tolerance:
        reason = "converged"
    return SolveReport(x, f, it, reason, gnorm, history)


def finite_diff_grad(f, x, h: float = 1e-6) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def finite_diff_jacobian(fun, x, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2.0 * h))
    return np.column_stack(cols)
