"""Relative bearing and range measurements.

Vehicles are identified by their integer index in the stacked state, landmarks
by their string id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .kinematics import wrap_angle
from .world import Landmark, RngStream

NodeId = Union[int, str]


def node_key(n: NodeId):
    """Sort key placing vehicles (ints) before landmarks (strings)."""
    return (0, n, "") if isinstance(n, (int, np.integer)) else (1, 0, str(n))


@dataclass(frozen=True)
class Measurement:
    observer: int
    target: NodeId
    kind: str
    value: float
    variance: float
    time_step: int

    def __post_init__(self):
        if self.observer == self.target:
            raise ValueError("observer and target must differ")
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        if self.kind == "bearing":
            if not -math.pi < self.value <= math.pi:
                raise ValueError(f"bearing {self.value} outside (-pi, pi]")
        elif self.kind == "range":
            if self.value <= 0:
                raise ValueError("range must be positive")
        else:
            raise ValueError(f"unknown measurement kind {self.kind!r}")


@dataclass
class MeasurementSet:
    time_step: int
    items: list[Measurement] = field(default_factory=list)
    # landmark positions keyed by id, needed to evaluate the model
    landmark_pos: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for m in self.items:
            if m.time_step != self.time_step:
                raise ValueError("measurement time_step mismatch")
            key = (m.observer, m.target, m.kind)
            if key in seen:
                raise ValueError(f"duplicate measurement {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.items)

    def bearing_arrays(self):
        """(observer idx, target vehicle idx or -1, target position, value, variance)."""
        b = [m for m in self.items if m.kind == "bearing"]
        obs = np.array([m.observer for m in b], dtype=int)
        tv = np.array([m.target if isinstance(m.target, (int, np.integer)) else -1 for m in b], dtype=int)
        tp = np.array(
            [self.landmark_pos[m.target] if not isinstance(m.target, (int, np.integer)) else (np.nan, np.nan) for m in b],
            dtype=float,
        ).reshape(-1, 2)
        val = np.array([m.value for m in b], dtype=float)
        var = np.array([m.variance for m in b], dtype=float)
        return obs, tv, tp, val, var

    def without_vehicle_targets(self) -> "MeasurementSet":
        keep = [m for m in self.items if not isinstance(m.target, (int, np.integer))]
        return MeasurementSet(self.time_step, keep, dict(self.landmark_pos))


def _xy(p) -> tuple[float, float]:
    if hasattr(p, "x"):
        return float(p.x), float(p.y)
    return float(p[0]), float(p[1])


def _pose(s) -> tuple[float, float, float]:
    if hasattr(s, "psi"):
        return float(s.x), float(s.y), float(s.psi)
    return float(s[0]), float(s[1]), float(s[2])


def los_angle(a, b) -> float:
    """World-frame line-of-sight angle from ``a`` to ``b``."""
    ax, ay = _xy(a)
    bx, by = _xy(b)
    if ax == bx and ay == by:
        raise ValueError("coincident positions: line of sight undefined")
    return math.atan2(by - ay, bx - ax)


def bearing(observer, target) -> float:
    x, y, psi = _pose(observer)
    return wrap_angle(los_angle((x, y), target) - psi)


def relative_range(a, b) -> float:
    ax, ay = _xy(a)
    bx, by = _xy(b)
    return math.hypot(bx - ax, by - ay)


def bearing_gradient(
    observer,
    target,
    target_is_vehicle: bool = False,
    observer_index: int = 0,
    target_index: int | None = None,
    n_vehicles: int | None = None,
) -> np.ndarray:
    """Gradient of ``bearing(observer, target)`` over the stacked state.

    Observer block is (sin t/R, -cos t/R, -1); a vehicle target gets the
    negated positional entries and a zero heading entry.
    """
    x, y, _ = _pose(observer)
    tx, ty = _xy(target)
    R = math.hypot(tx - x, ty - y)
    if R == 0.0:
        raise ValueError("coincident positions: gradient undefined")
    theta = math.atan2(ty - y, tx - x)
    s, c = math.sin(theta) / R, math.cos(theta) / R
    if target_is_vehicle and target_index is None:
        target_index = 1 if observer_index == 0 else 0
    if n_vehicles is None:
        n_vehicles = 1 + max(observer_index, target_index if target_is_vehicle else 0)
    row = np.zeros(3 * n_vehicles)
    row[3 * observer_index : 3 * observer_index + 3] = (s, -c, -1.0)
    if target_is_vehicle:
        row[3 * target_index : 3 * target_index + 2] += (-s, c)
    return row


def bearing_model(X: np.ndarray, obs: np.ndarray, tv: np.ndarray, tp: np.ndarray) -> np.ndarray:
    """Vectorized bearings for stacked states ``X`` (n, 3)."""
    tgt = np.where((tv >= 0)[:, None], X[np.maximum(tv, 0), :2], tp)
    d = tgt - X[obs, :2]
    return wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - X[obs, 2])


def bearing_jacobian(X: np.ndarray, obs: np.ndarray, tv: np.ndarray, tp: np.ndarray) -> np.ndarray:
    """Rows of ``bearing_gradient`` for every measurement, shape (m, 3n)."""
    n = X.shape[0]
    m = len(obs)
    H = np.zeros((m, 3 * n))
    if m == 0:
        return H
    tgt = np.where((tv >= 0)[:, None], X[np.maximum(tv, 0), :2], tp)
    d = tgt - X[obs, :2]
    R2 = np.einsum("ij,ij->i", d, d)
    gx = d[:, 1] / R2  # sin(theta) / R
    gy = -d[:, 0] / R2  # -cos(theta) / R
    rows = np.arange(m)
    H[rows, 3 * obs] = gx
    H[rows, 3 * obs + 1] = gy
    H[rows, 3 * obs + 2] = -1.0
    veh = tv >= 0
    np.add.at(H, (rows[veh], 3 * tv[veh]), -gx[veh])
    np.add.at(H, (rows[veh], 3 * tv[veh] + 1), -gy[veh])
    return H


def sense_all(
    states,
    landmarks: Sequence[Landmark],
    Rs: float,
    gamma: float,
    rng: RngStream | None,
    time_step: int = 0,
    cooperation: bool = True,
) -> MeasurementSet:
    """Noisy bearings from every vehicle to every node within ``Rs``.

    ``rng=None`` gives noiseless values. One normal draw is consumed per
    measurement, in observer-major order (vehicles first, then landmarks).
    """
    if Rs <= 0:
        raise ValueError("sensor range must be positive")
    X = np.array([_pose(s) for s in states]) if not isinstance(states, np.ndarray) else states
    n = X.shape[0]
    pairs = []
    for i in range(n):
        if cooperation:
            for j in range(n):
                if j != i and math.hypot(X[j, 0] - X[i, 0], X[j, 1] - X[i, 1]) <= Rs:
                    pairs.append((i, j, (X[j, 0], X[j, 1])))
        for lm in landmarks:
            if math.hypot(lm.x - X[i, 0], lm.y - X[i, 1]) <= Rs:
                pairs.append((i, lm.id, (lm.x, lm.y)))
    noise = rng.standard_normal(len(pairs)) if rng is not None and pairs else np.zeros(len(pairs))
    sd = math.sqrt(gamma)
    items = []
    for (i, tgt, pos), z in zip(pairs, noise):
        true = bearing(X[i], pos)
        items.append(Measurement(i, tgt, "bearing", wrap_angle(true + sd * z), gamma, time_step))
    return MeasurementSet(time_step, items, {lm.id: (lm.x, lm.y) for lm in landmarks})
