import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopnav.rpmg import (
    Rpmg,
    adjacency_weight,
    build_rpmg,
    edge_key,
    enumerate_paths,
    is_connected,
    lambda2,
    vehicle_laplacian,
)
from coopnav.world import Landmark

# five vehicles, three landmarks, seven edges at Rs = 10
FIVE_BY_THREE = (
    np.array([[-8, 0, 0], [8, 0, 0], [24, 9, 0], [16, 0, 0], [24, 0, 0]], dtype=float),
    [Landmark("a", 0.0, 0.0), Landmark("b", 30.0, 15.0), Landmark("c", 18.0, 15.0)],
)


def test_five_by_three_layout_has_seven_edges():
    g = build_rpmg(*FIVE_BY_THREE, Rs=10.0)
    assert g.n_edges == 7
    assert set(g.edges) == {
        (0, "a"), (1, "a"), (1, 3), (3, 4), (2, 4), (2, "b"), (2, "c"),
    }


def test_path_from_last_vehicle_to_a():
    g = build_rpmg(*FIVE_BY_THREE, Rs=10.0)
    paths = enumerate_paths(g, 4, "a")
    assert [p.vertices for p in paths] == [(4, 3, 1, "a")]
    assert str(paths[0]) == "4-3-1-a"
    assert len(paths[0]) == 3


def test_edgeless_and_no_landmark_edges():
    X = np.array([[0.0, 0.0, 0.0], [100.0, 0.0, 0.0]])
    assert build_rpmg(X, [Landmark("A", 50.0, 80.0)], 10.0).n_edges == 0
    g = build_rpmg(X[:1], [Landmark("A", 150.0, 150.0), Landmark("B", 151.0, 150.0)], 10.0)
    assert g.n_edges == 0


def test_cooperation_off_drops_vehicle_edges():
    X = np.array([[0.0, 0.0, 0.0], [5.0, 0.0, 0.0]])
    lm = [Landmark("A", 2.0, 2.0)]
    assert (0, 1) in build_rpmg(X, lm, 10.0).edges
    assert (0, 1) not in build_rpmg(X, lm, 10.0, cooperation=False).edges


def test_adjacency_weight_values():
    assert adjacency_weight(0.5, 5.0, 0.5, 50.0) == 1.0
    assert adjacency_weight(50.0, 5.0, 0.5, 50.0) == pytest.approx(6.737946999085467e-3, rel=1e-12)
    assert adjacency_weight(50.001, 5.0, 0.5, 50.0) == 0.0
    with pytest.raises(ValueError):
        adjacency_weight(1.0, 5.0, 10.0, 10.0)


@given(st.floats(0.5, 50.0), st.floats(0.5, 50.0))
def test_adjacency_weight_decreasing(d1, d2):
    lo, hi = sorted((d1, d2))
    assert adjacency_weight(lo, 5.0, 0.5, 50.0) >= adjacency_weight(hi, 5.0, 0.5, 50.0)


def _graph(vehicle_pos, landmark_pos, Rs=50.0):
    X = np.array([[x, y, 0.0] for x, y in vehicle_pos])
    lms = [Landmark(f"L{k}", x, y) for k, (x, y) in enumerate(landmark_pos)]
    return build_rpmg(X, lms, Rs)


def test_isolated_vehicle_laplacian():
    L, nodes = vehicle_laplacian(_graph([(0, 0)], [(100, 100)]), 0, 5.0, 0.5)
    assert L.shape == (1, 1) and L[0, 0] == 0.0
    assert nodes == [0]


def test_two_node_laplacian():
    g = _graph([(0, 0)], [(10, 0)])
    w = adjacency_weight(10.0, 5.0, 0.5, 50.0)
    L, _ = vehicle_laplacian(g, 0, 5.0, 0.5)
    assert np.array_equal(L, np.array([[w, -w], [-w, w]]))


def test_three_node_star_degrees():
    g = _graph([(0, 0)], [(0.5, 0), (-0.5, 0)], Rs=0.9)
    L, _ = vehicle_laplacian(g, 0, 5.0, 0.5)
    assert np.allclose(np.diag(L), [2, 1, 1])
    assert np.allclose(L.sum(axis=1), 0)


def test_lambda2_examples():
    w = 0.37
    assert lambda2(np.array([[w, -w], [-w, w]])) == pytest.approx(2 * w, abs=1e-12)
    split = np.zeros((4, 4))
    split[:2, :2] = [[1, -1], [-1, 1]]
    split[2:, 2:] = [[1, -1], [-1, 1]]
    assert lambda2(split) == pytest.approx(0.0, abs=1e-12)
    tri = 3 * np.eye(3) - np.ones((3, 3))
    assert lambda2(tri) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(ValueError):
        lambda2(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_laplacian_properties(seed, n):
    rng = np.random.default_rng(seed)
    g = _graph(rng.uniform(0, 60, (n, 2)), rng.uniform(0, 60, (3, 2)))
    for i in range(n):
        L, nodes = vehicle_laplacian(g, i, 5.0, 0.5)
        assert np.allclose(L, L.T)
        assert np.allclose(L.sum(axis=1), 0.0, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(L) >= -1e-12)
        connected = is_connected(nodes, [e for e in g.edges if e[0] in nodes and e[1] in nodes])
        assert (lambda2(L) > 1e-12) == (connected and len(nodes) > 1)


def test_complete_graph_paths():
    g = _graph([(0, 0), (1, 0)], [(0, 1)])
    paths = enumerate_paths(g, 0, "L0")
    assert [p.vertices for p in paths] == [(0, 1, "L0"), (0, "L0")]


def test_max_hops_limits_paths():
    g = build_rpmg(*FIVE_BY_THREE, Rs=10.0)
    assert enumerate_paths(g, 4, "a", max_hops=2) == []
    with pytest.raises(ValueError):
        enumerate_paths(g, 4, "a", max_hops=0)


def test_landmarks_do_not_relay_paths():
    # vehicle 0 sees landmark A, which vehicle 1 also sees; that is not a path to B
    g = _graph([(0, 0), (20, 0)], [(10, 0), (30, 0)], Rs=11.0)
    assert enumerate_paths(g, 0, "L1") == []


def test_edge_key_orders_vehicles_first():
    assert edge_key("a", 3) == (3, "a")
    assert edge_key(2, 1) == (1, 2)


def test_dump_is_sorted_and_weighted():
    g = _graph([(0, 0)], [(10, 0)]).with_weights(5.0, 0.5)
    line = g.dump().strip()
    assert line.startswith("0 L0 10 ")
    assert math.isclose(float(line.split()[-1]), adjacency_weight(10.0, 5.0, 0.5, 50.0))
    assert isinstance(g, Rpmg)


@given(
    st.floats(0.01, 5.0),
    st.floats(0.0, 20.0),
    st.floats(0.5, 100.0),
)
def test_adjacency_exact_at_both_ends(kappa, rho, extra):
    Rs = rho + extra
    assert adjacency_weight(rho, kappa, rho, Rs) == 1.0
    assert adjacency_weight(Rs, kappa, rho, Rs) == math.exp(-kappa)
    assert adjacency_weight(math.nextafter(Rs, math.inf), kappa, rho, Rs) == 0.0
