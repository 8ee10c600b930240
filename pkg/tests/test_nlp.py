import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopnav.nlp import SolverOptions, finite_diff_grad, finite_diff_jacobian, solve_box_min, solve_nls


def test_linear_least_squares_in_few_iterations():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(8, 3))
    b = rng.normal(size=8)
    rep = solve_nls(lambda x: A @ x - b, lambda x: A, np.zeros(3), opts=SolverOptions(initial_damping=0.0))
    assert np.allclose(rep.x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-10)
    assert rep.iterations <= 3


def test_rosenbrock_residuals():
    def r(x):
        return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

    def J(x):
        return np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])

    rep = solve_nls(r, J, np.array([-1.2, 1.0]))
    assert rep.converged
    assert np.allclose(rep.x, [1.0, 1.0], atol=1e-6)
    assert all(b <= a for a, b in zip(rep.history, rep.history[1:]))


def test_nls_active_bound():
    rep = solve_nls(lambda x: x - 5.0, lambda x: np.eye(1), np.array([1.0]), lower=[0.0], upper=[2.0])
    assert rep.x[0] == 2.0
    with pytest.raises(ValueError):
        solve_nls(lambda x: x, lambda x: np.eye(1), np.array([3.0]), lower=[0.0], upper=[2.0])


def test_nls_rejects_bad_jacobian_shape():
    with pytest.raises(ValueError, match="jacobian shape"):
        solve_nls(lambda x: x, lambda x: np.eye(2), np.zeros(1))


def test_options_validated():
    with pytest.raises(ValueError):
        SolverOptions(max_iters=0)
    with pytest.raises(ValueError):
        SolverOptions(backtrack=1.5)


@given(st.lists(st.floats(-0.9, 0.9), min_size=3, max_size=3))
def test_box_min_interior_quadratic(c):
    c = np.array(c)
    rep = solve_box_min(lambda x: float((x - c) @ (x - c)), lambda x: 2 * (x - c), np.zeros(3), -np.ones(3), np.ones(3))
    assert np.allclose(rep.x, c, atol=1e-8)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_box_min_projects_exterior_target(c):
    c = np.array(c)
    rep = solve_box_min(lambda x: float((x - c) @ (x - c)), lambda x: 2 * (x - c), np.zeros(3), -np.ones(3), np.ones(3))
    assert np.allclose(rep.x, np.clip(c, -1, 1), atol=1e-8)


def himmelblau(x):
    return (x[0] ** 2 + x[1] - 11) ** 2 + (x[0] + x[1] ** 2 - 7) ** 2


def himmelblau_grad(x):
    a = x[0] ** 2 + x[1] - 11
    b = x[0] + x[1] ** 2 - 7
    return np.array([4 * a * x[0] + 2 * b, 2 * a + 4 * b * x[1]])


@pytest.mark.parametrize("start", [(0.0, 0.0), (-4.0, 4.0), (4.0, -4.0), (-4.0, -4.0)])
def test_himmelblau_stationary(start):
    opts = SolverOptions(max_iters=2000, gradient_tolerance=1e-7)
    rep = solve_box_min(himmelblau, himmelblau_grad, np.array(start), -6 * np.ones(2), 6 * np.ones(2), opts)
    assert rep.gradient_norm <= 1e-6
    assert all(b <= a for a, b in zip(rep.history, rep.history[1:]))


def test_box_min_combined_callable():
    rep = solve_box_min(None, lambda x: (float(x @ x), 2 * x), np.array([3.0, -2.0]))
    assert np.allclose(rep.x, 0.0, atol=1e-8)


def test_finite_difference_examples():
    g = finite_diff_grad(lambda x: float(x @ x), np.array([1.0, 2.0]))
    assert g == pytest.approx([2.0, 4.0], abs=1e-8)
    g = finite_diff_grad(lambda x: math.sin(x[0]) * x[1], np.array([0.0, 3.0]), h=1e-5)
    assert g == pytest.approx([3.0, 0.0], abs=1e-8)
    with pytest.raises(ValueError):
        finite_diff_grad(lambda x: 0.0, np.zeros(1), h=0.0)


def test_finite_difference_jacobian_linear_map():
    A = np.arange(6.0).reshape(2, 3)
    assert np.allclose(finite_diff_jacobian(lambda x: A @ x, np.ones(3)), A, atol=1e-9)
