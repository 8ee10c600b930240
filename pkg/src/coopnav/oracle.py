"""Cross-checks between the path-sum covariance and the inverted scalar Gramian.

Each configuration is a small measurement graph with one landmark. Edge
weights ``o`` are observability entries; the path-sum side uses the edge
information ``o**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import gramian_oracle, vehicle_landmark_covariance
from .rpmg import Rpmg, edge_key


@dataclass(frozen=True)
class OracleConfig:
    name: str
    n_vehicles: int
    landmark: str
    # (node, node, weight name); vehicles are ints, the landmark a str
    edges: tuple[tuple, ...]

    @property
    def weight_names(self) -> tuple[str, ...]:
        return tuple(e[2] for e in self.edges)

    def graph(self) -> Rpmg:
        pos = {i: (0.0, 0.0) for i in range(self.n_vehicles)}
        pos[self.landmark] = (0.0, 0.0)
        g = Rpmg(pos, list(range(self.n_vehicles)), [self.landmark], 1.0)
        for a, b, _ in self.edges:
            g.edges[edge_key(a, b)] = 1.0
        return g


CONFIGURATIONS = {
    # landmark a seen by vehicle 1, which sees vehicle 2
    "p2a": OracleConfig("p2a", 2, "a", (("a", 0, "oa1"), (0, 1, "o12"))),
    # landmark b seen by vehicle 2, which sees vehicle 1
    "p2b": OracleConfig("p2b", 2, "b", (("b", 1, "ob2"), (0, 1, "o12"))),
    "p3a": OracleConfig("p3a", 3, "a", (("a", 0, "oa1"), (0, 1, "o12"), ("a", 2, "oa3"))),
    "p3b": OracleConfig("p3b", 3, "b", (("b", 1, "ob2"), (0, 1, "o12"), ("b", 2, "ob3"))),
}


def path_sum_diagonal(cfg: OracleConfig, weights: dict[str, float]) -> np.ndarray:
    g = cfg.graph()
    infos = {edge_key(a, b): weights[w] ** 2 for a, b, w in cfg.edges}
    return np.array([vehicle_landmark_covariance(g, i, cfg.landmark, infos) for i in range(cfg.n_vehicles)])


def gramian_diagonal(cfg: OracleConfig, weights: dict[str, float]) -> np.ndarray:
    rows = []
    for a, b, w in cfg.edges:
        if isinstance(a, str):
            rows.append((b, None, weights[w]))
        elif isinstance(b, str):
            rows.append((a, None, weights[w]))
        else:
            rows.append((a, b, weights[w]))
    return np.diag(gramian_oracle(rows, cfg.n_vehicles))


def equivalence_error(cfg: OracleConfig, weights: dict[str, float]) -> float:
    """Largest relative difference between the two diagonals."""
    p = path_sum_diagonal(cfg, weights)
    q = gramian_diagonal(cfg, weights)
    return float(np.max(np.abs(p - q) / np.abs(q)))


def random_weights(cfg: OracleConfig, rng: np.random.Generator, low=0.1, high=10.0) -> dict[str, float]:
    return {w: float(rng.uniform(low, high)) for w in cfg.weight_names}


@dataclass
class ContradictionResult:
    modified_P: np.ndarray
    implied_gramian: np.ndarray
    true_gramian: np.ndarray
    residual: float
    singular: bool


def true_gramian_p3a(oa1: float, o12: float, oa3: float) -> np.ndarray:
    O = np.array([[oa1, 0, 0], [o12, -o12, 0], [0, 0, oa3]], dtype=float)
    return O.T @ O


def contradiction_check(oa1: float = 1.0, o12: float = 1.0, oa3: float = 1.0) -> ContradictionResult:
    """Drop the landmark edge term from vehicle 2's entry and invert.

    The truncated covariance is singular when ``oa1 == o12``; the pseudo-inverse
    is used there.
    """
    a, b, c = 1.0 / oa1**2, 1.0 / o12**2, 1.0 / oa3**2
    P = np.array([[a, a, 0.0], [a, b, 0.0], [0.0, 0.0, c]])
    singular = np.linalg.matrix_rank(P) < 3
    implied = np.linalg.pinv(P) if singular else np.linalg.inv(P)
    true = true_gramian_p3a(oa1, o12, oa3)
    return ContradictionResult(P, implied, true, float(np.linalg.norm(implied - true)), bool(singular))


def implied_gramian_closed_form(oa1: float, o12: float, oa3: float) -> np.ndarray:
    """Hand inverse of the truncated covariance, valid for ``oa1 != o12``."""
    a2, b2 = oa1**2, o12**2
    k = a2 - b2
    return np.array(
        [[a2 * a2 / k, -a2 * b2 / k, 0.0], [-a2 * b2 / k, a2 * b2 / k, 0.0], [0.0, 0.0, oa3**2]]
    )


def extra_term_gramian(oa1: float, o12: float, oa3: float) -> np.ndarray:
    """Inverse after adding the other landmark's term to vehicle 2's entry."""
    a, b, c = 1.0 / oa1**2, 1.0 / o12**2, 1.0 / oa3**2
    P = np.array([[a, a, 0.0], [a, a + b + c, 0.0], [0.0, 0.0, c]])
    return np.linalg.inv(P)


def extra_term_closed_form(oa1: float, o12: float, oa3: float) -> np.ndarray:
    a2, b2, c2 = oa1**2, o12**2, oa3**2
    m = b2 * c2 / (b2 + c2)
    return np.array([[a2 + m, -m, 0.0], [-m, m, 0.0], [0.0, 0.0, c2]])


def oracle_report(draws: int = 100, seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    ok = True
    lines = []
    for name, cfg in CONFIGURATIONS.items():
        worst = max(equivalence_error(cfg, random_weights(cfg, rng)) for _ in range(draws))
        good = worst <= 1e-10
        ok &= good
        lines.append(f"{name}: max relative error {worst:.3e} over {draws} draws {'PASS' if good else 'FAIL'}")
    cr = contradiction_check()
    good = cr.residual > 0.1
    ok &= good
    lines.append(f"truncated covariance: gramian residual {cr.residual:.3f} (singular={cr.singular}) {'PASS' if good else 'FAIL'}")
    return ok, "\n".join(lines)
