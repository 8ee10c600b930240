"""Closed-form localization uncertainty from the measurement graph.

A vehicle's position covariance due to one landmark is the sum of inverse edge
informations along a connecting path; multiple paths and multiple landmarks add.
``gramian_oracle`` inverts the scalar observability Gramian directly and is the
independent check on those sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .kinematics import wrap_angle
from .rpmg import Path, Rpmg, enumerate_paths

SIN_FLOOR = 1e-3
DENOM_FLOOR = 1e-6
UNLOCALIZED = math.inf


@dataclass(frozen=True)
class EdgeInformation:
    edge: tuple
    epsilon: float


@dataclass(frozen=True)
class GeometrySummary:
    Rg: float
    theta_g: float


@dataclass
class CovariancePrediction:
    p: dict[int, float]
    sigma_p: dict[int, float]
    p_ij: dict[tuple[int, str], float]


def edge_information(length: float, kind: str = "bearing", edge=None) -> EdgeInformation:
    """Squared positional-gradient norm of the edge's measurement."""
    if not length > 0:
        raise ValueError("edge length must be positive")
    if kind == "bearing":
        eps = 1.0 / (length * length)
    elif kind == "range":
        eps = 1.0
    else:
        raise ValueError(f"unknown measurement kind {kind!r}")
    return EdgeInformation(edge, eps)


def path_covariance(path: Path, infos: Mapping) -> float:
    total = 0.0
    for e in path.edges:
        if e not in infos:
            raise KeyError(f"no information for edge {e}")
        info = infos[e]
        total += 1.0 / (info.epsilon if isinstance(info, EdgeInformation) else info)
    return total


def graph_informations(g: Rpmg, kind: str = "bearing") -> dict:
    return {e: edge_information(d, kind, e) for e, d in g.edges.items()}


def vehicle_landmark_covariance(g: Rpmg, vehicle: int, landmark: str, infos=None, max_hops=None) -> float:
    infos = graph_informations(g) if infos is None else infos
    return sum(path_covariance(p, infos) for p in enumerate_paths(g, vehicle, landmark, max_hops))


def vehicle_covariance(g: Rpmg, vehicle: int, max_hops: int | None = None, infos=None) -> float:
    """Sum over reachable landmarks and their paths; ``UNLOCALIZED`` if none."""
    infos = graph_informations(g) if infos is None else infos
    total, reached = 0.0, False
    for lm in g.landmarks:
        paths = enumerate_paths(g, vehicle, lm, max_hops)
        if paths:
            reached = True
            total += sum(path_covariance(p, infos) for p in paths)
    return total if reached else UNLOCALIZED


def predict_covariance(g: Rpmg, max_hops: int | None = None) -> CovariancePrediction:
    infos = graph_informations(g)
    p, s, pij = {}, {}, {}
    for v in g.vehicles:
        for lm in g.landmarks:
            c = vehicle_landmark_covariance(g, v, lm, infos, max_hops)
            if c > 0:
                pij[(v, lm)] = c
        p[v] = vehicle_covariance(g, v, max_hops, infos)
        s[v] = math.sqrt(p[v])
    return CovariancePrediction(p, s, pij)


def _floored_sin2(delta):
    s = np.abs(np.sin(delta))
    return np.maximum(s, SIN_FLOOR) ** 2


def sigma_p_range(Rg, psi, theta_g):
    """sqrt(2/3 + Rg^2 csc^2(psi - theta_g)), |sin| floored."""
    delta = wrap_angle(np.asarray(psi, dtype=float) - theta_g)
    Rg = np.asarray(Rg, dtype=float)
    out = np.sqrt(2.0 / 3.0 + Rg**2 / _floored_sin2(delta))
    return float(out) if out.ndim == 0 else out


def sigma_p_bearing(Rg, psi, theta_g):
    """Closed-form bearing-only position sigma; works elementwise on arrays."""
    delta = wrap_angle(np.asarray(psi, dtype=float) - theta_g)
    Rg = np.asarray(Rg, dtype=float)
    R2 = Rg * Rg
    denom = np.maximum(2.0 + R2 + 2.0 * np.cos(2.0 * delta), DENOM_FLOOR)
    var = 4.5 * R2 * (1.0 + R2 / denom) + (R2 + R2 * R2) / _floored_sin2(delta)
    out = np.sqrt(var)
    return float(out) if out.ndim == 0 else out


def avg_geometry(g: Rpmg, vehicle: int) -> GeometrySummary:
    """Mean incident edge length and circular-mean line-of-sight angle."""
    nbrs = g.neighbors(vehicle)
    if not nbrs:
        raise ValueError(f"vehicle {vehicle} has no incident edges")
    vx, vy = g.positions[vehicle]
    d = np.array([g.positions[n] for n in nbrs]) - (vx, vy)
    R = np.hypot(d[:, 0], d[:, 1])
    th = np.arctan2(d[:, 1], d[:, 0])
    return GeometrySummary(float(R.mean()), float(np.arctan2(np.sin(th).sum(), np.cos(th).sum())))


def gramian_oracle(edges: Iterable, n_vehicles: int) -> np.ndarray:
    """(O^T O)^-1 for the scalar-per-vehicle observability matrix.

    ``edges`` holds ``(a, b, o)``: a landmark edge has ``b is None`` and puts
    ``o`` in column ``a``; a vehicle edge puts ``+o`` at ``a`` and ``-o`` at ``b``.
    """
    rows = []
    for a, b, o in edges:
        r = np.zeros(n_vehicles)
        r[a] = o
        if b is not None:
            r[b] = -o
        rows.append(r)
    O = np.array(rows).reshape(-1, n_vehicles)
    if np.linalg.matrix_rank(O) < n_vehicles:
        raise np.linalg.LinAlgError("observability matrix is rank deficient")
    return np.linalg.inv(O.T @ O)


def gramian_config(g: Rpmg, kind: str = "bearing") -> list:
    """Edge list for ``gramian_oracle`` built from a measurement graph."""
    out = []
    for (a, b), d in g.edges.items():
        o = math.sqrt(edge_information(d, kind).epsilon)
        if isinstance(b, str):
            out.append((a, None, o))
        elif isinstance(a, str):
            out.append((b, None, o))
        else:
            out.append((a, b, o))
    return out
