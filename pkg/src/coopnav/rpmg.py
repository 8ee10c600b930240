"""Relative position measurement graphs and their per-vehicle Laplacians."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sensing import NodeId, node_key


def _is_vehicle(n) -> bool:
    return isinstance(n, (int, np.integer))


def edge_key(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if node_key(a) <= node_key(b) else (b, a)


@dataclass(frozen=True)
class Path:
    vertices: tuple[NodeId, ...]

    @property
    def edges(self) -> tuple[tuple[NodeId, NodeId], ...]:
        return tuple(edge_key(a, b) for a, b in zip(self.vertices, self.vertices[1:]))

    def __len__(self) -> int:
        return len(self.vertices) - 1

    def __str__(self) -> str:
        return "-".join(str(v) for v in self.vertices)


@dataclass
class Rpmg:
    positions: dict[NodeId, tuple[float, float]]
    vehicles: list[int]
    landmarks: list[str]
    sensor_range: float
    edges: dict[tuple[NodeId, NodeId], float] = field(default_factory=dict)
    weights: dict[tuple[NodeId, NodeId], float] | None = None

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, node: NodeId) -> list[NodeId]:
        out = [b if a == node else a for a, b in self.edges if node in (a, b)]
        return sorted(out, key=node_key)

    def distance(self, a: NodeId, b: NodeId) -> float:
        (ax, ay), (bx, by) = self.positions[a], self.positions[b]
        return math.hypot(bx - ax, by - ay)

    def with_weights(self, kappa: float, rho: float) -> "Rpmg":
        w = {e: adjacency_weight(d, kappa, rho, self.sensor_range) for e, d in self.edges.items()}
        return Rpmg(self.positions, self.vehicles, self.landmarks, self.sensor_range, dict(self.edges), w)

    def dump(self) -> str:
        """One ``node_a node_b distance weight`` line per edge."""
        lines = []
        for (a, b), d in sorted(self.edges.items(), key=lambda kv: (node_key(kv[0][0]), node_key(kv[0][1]))):
            w = self.weights[(a, b)] if self.weights else float("nan")
            lines.append(f"{a} {b} {d:.17g} {w:.17g}")
        return "\n".join(lines) + ("\n" if lines else "")


def build_rpmg(vehicle_states, landmarks, Rs: float, cooperation: bool = True) -> Rpmg:
    """Edges join vehicle pairs and vehicle-landmark pairs within ``Rs``.

    ``cooperation=False`` drops vehicle-vehicle edges.
    """
    if Rs <= 0:
        raise ValueError("sensor range must be positive")
    X = np.asarray(
        [s.as_array() if hasattr(s, "as_array") else s for s in vehicle_states], dtype=float
    ).reshape(-1, 3)
    pos: dict[NodeId, tuple[float, float]] = {i: (X[i, 0], X[i, 1]) for i in range(len(X))}
    for lm in landmarks:
        pos[lm.id] = (lm.x, lm.y)
    g = Rpmg(pos, list(range(len(X))), [lm.id for lm in landmarks], Rs)
    for i in range(len(X)):
        if cooperation:
            for j in range(i + 1, len(X)):
                d = g.distance(i, j)
                if d <= Rs:
                    g.edges[(i, j)] = d
        for lm in landmarks:
            d = g.distance(i, lm.id)
            if d <= Rs:
                g.edges[(i, lm.id)] = d
    return g


def adjacency_weight(distance, kappa: float, rho: float, Rs: float):
    """exp(-kappa (d - rho) / (Rs - rho)) inside the sensor range, 0 beyond it."""
    if not Rs > rho:
        raise ValueError("Rs must exceed rho")
    d = np.asarray(distance, dtype=float)
    if d.ndim == 0:
        # math.exp keeps A(Rs) bit-identical to exp(-kappa)
        d = float(d)
        return math.exp(-kappa * ((d - rho) / (Rs - rho))) if d <= Rs else 0.0
    return np.where(d <= Rs, np.exp(-kappa * ((d - rho) / (Rs - rho))), 0.0)


def vehicle_nodes(g: Rpmg, vehicle: int) -> list[NodeId]:
    if vehicle not in g.vehicles:
        raise KeyError(f"unknown vehicle {vehicle!r}")
    return [vehicle] + g.neighbors(vehicle)


def vehicle_laplacian(g: Rpmg, vehicle: int, kappa: float, rho: float) -> tuple[np.ndarray, list[NodeId]]:
    """Weighted Laplacian of the subgraph induced by ``vehicle`` and its neighbors.

    Returns the matrix and the node order (vehicle first).
    """
    nodes = vehicle_nodes(g, vehicle)
    idx = {n: k for k, n in enumerate(nodes)}
    A = np.zeros((len(nodes), len(nodes)))
    for (a, b), d in g.edges.items():
        if a in idx and b in idx:
            w = adjacency_weight(d, kappa, rho, g.sensor_range)
            A[idx[a], idx[b]] = A[idx[b], idx[a]] = w
    return np.diag(A.sum(axis=1)) - A, nodes


def lambda2(L: np.ndarray) -> float:
    """Second-smallest eigenvalue (0 for a single node)."""
    L = np.asarray(L, dtype=float)
    if L.shape[0] != L.shape[1]:
        raise ValueError("Laplacian must be square")
    if np.max(np.abs(L - L.T), initial=0.0) > 1e-9:
        raise ValueError("Laplacian is not symmetric")
    if L.shape[0] < 2:
        return 0.0
    return float(np.linalg.eigvalsh(L)[1])


def enumerate_paths(g: Rpmg, vehicle: int, landmark: str, max_hops: int | None = None) -> list[Path]:
    """All simple paths vehicle -> landmark with at most ``max_hops`` edges.

    Intermediate vertices are vehicles only: a known landmark ends a path.
    Paths come back sorted by vertex sequence.
    """
    if vehicle not in g.vehicles or landmark not in g.landmarks:
        raise KeyError("unknown vehicle or landmark")
    if max_hops is None:
        max_hops = len(g.vehicles) + 1
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    adj: dict[NodeId, list[NodeId]] = {}
    for a, b in g.edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for n in adj:
        adj[n].sort(key=node_key)

    found: list[Path] = []
    stack = [vehicle]
    on_path = {vehicle}

    def dfs(node):
        for nxt in adj.get(node, ()):
            if nxt in on_path:
                continue
            if nxt == landmark:
                found.append(Path(tuple(stack) + (nxt,)))
            elif _is_vehicle(nxt) and len(stack) < max_hops:
                stack.append(nxt)
                on_path.add(nxt)
                dfs(nxt)
                stack.pop()
                on_path.discard(nxt)

    dfs(vehicle)
    found.sort(key=lambda p: [node_key(v) for v in p.vertices])
    return found


def is_connected(g_nodes: list[NodeId], edges) -> bool:
    """Union-find connectivity of ``g_nodes`` under ``edges``."""
    parent = {n: n for n in g_nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        if a in parent and b in parent:
            parent[find(a)] = find(b)
    return len({find(n) for n in g_nodes}) <= 1
