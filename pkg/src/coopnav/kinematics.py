"""Constant-speed unicycle with forward-Euler discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import ControlInput, VehicleState

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap to (-pi, pi]. Works on scalars and arrays."""
    if np.ndim(theta) == 0:
        t = float(theta)
        if not math.isfinite(t):
            raise ValueError(f"cannot wrap non-finite angle {theta}")
        w = math.fmod(t + math.pi, TWO_PI)
        if w <= 0.0:
            w += TWO_PI
        return w - math.pi
    t = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("cannot wrap non-finite angle")
    w = np.fmod(t + math.pi, TWO_PI)
    w = np.where(w <= 0.0, w + TWO_PI, w)
    return w - math.pi


def step(state: VehicleState, u: ControlInput, v: float, dt: float) -> VehicleState:
    return VehicleState(
        state.x + dt * v * math.cos(state.psi),
        state.y + dt * v * math.sin(state.psi),
        state.psi + dt * u.omega,
    )


def step_array(X: np.ndarray, omega: np.ndarray, v, dt: float) -> np.ndarray:
    """One Euler step of stacked states ``X`` (n, 3) under turn rates ``omega`` (n,).

    ``v`` may be a per-vehicle array (0 for a parked vehicle).
    """
    out = np.empty_like(X, dtype=float)
    out[:, 0] = X[:, 0] + dt * v * np.cos(X[:, 2])
    out[:, 1] = X[:, 1] + dt * v * np.sin(X[:, 2])
    out[:, 2] = wrap_angle(X[:, 2] + dt * omega)
    return out


def step_jacobian(X: np.ndarray, v, dt: float) -> np.ndarray:
    """Block-diagonal Jacobian of ``step_array`` w.r.t. the flattened state."""
    n = X.shape[0]
    v = np.broadcast_to(np.asarray(v, dtype=float), (n,))
    F = np.eye(3 * n)
    idx = 3 * np.arange(n)
    F[idx, idx + 2] = -dt * v * np.sin(X[:, 2])
    F[idx + 1, idx + 2] = dt * v * np.cos(X[:, 2])
    return F


@dataclass
class Trajectory:
    states: np.ndarray  # (steps + 1, n_vehicles, 3)
    dt: float

    def __len__(self) -> int:
        return self.states.shape[0]

    def vehicle(self, i: int) -> np.ndarray:
        return self.states[:, i, :]


def propagate(initial, controls, v: float, dt: float) -> Trajectory:
    """Roll stacked states forward.

    ``initial`` is (n, 3) or a list of VehicleState; ``controls`` is a (steps, n)
    array of turn rates or a list of per-step ControlInput lists.
    """
    if len(controls) == 0:
        raise ValueError("control list is empty")
    if isinstance(initial, (list, tuple)) and initial and isinstance(initial[0], VehicleState):
        X = np.array([s.as_array() for s in initial])
    else:
        X = np.array(initial, dtype=float).reshape(-1, 3)
    W = np.array(
        [[u.omega if isinstance(u, ControlInput) else u for u in row] for row in controls]
        if not isinstance(controls, np.ndarray)
        else controls,
        dtype=float,
    ).reshape(len(controls), X.shape[0])
    states = np.empty((W.shape[0] + 1,) + X.shape)
    states[0] = X
    for k in range(W.shape[0]):
        states[k + 1] = step_array(states[k], W[k], v, dt)
    return Trajectory(states, dt)
