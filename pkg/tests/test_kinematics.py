import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coopnav.kinematics import propagate, step, step_array, step_jacobian, wrap_angle
from coopnav.nlp import finite_diff_jacobian
from coopnav.world import ControlInput, VehicleState

angles = st.floats(-1e3, 1e3, allow_nan=False)


def test_straight_step():
    s = step(VehicleState(0.0, 0.0, 0.0), ControlInput(0.0), 5.0, 0.1)
    assert (s.x, s.y, s.psi) == pytest.approx((0.5, 0.0, 0.0))


def test_step_north():
    s = step(VehicleState(0.0, 0.0, math.pi / 2), ControlInput(0.0), 5.0, 0.1)
    assert (s.x, s.y, s.psi) == pytest.approx((0.0, 0.5, math.pi / 2), abs=1e-15)


def test_euler_arc_close_to_analytic():
    v, w, dt = 5.0, math.pi / 2, 0.1
    traj = propagate(np.zeros((1, 3)), np.full((40, 1), w), v, dt)
    t = 4.0
    exact = (v / w) * np.array([math.sin(w * t), 1.0 - math.cos(w * t)])
    assert np.linalg.norm(traj.states[-1, 0, :2] - exact) <= 0.5


def test_single_step_propagation_matches_step():
    s0 = VehicleState(3.0, -2.0, 0.4)
    traj = propagate([s0], [[ControlInput(0.3)]], 5.0, 0.1)
    s1 = step(s0, ControlInput(0.3), 5.0, 0.1)
    assert np.array_equal(traj.states[1, 0], s1.as_array())


def test_propagate_rejects_empty_controls():
    with pytest.raises(ValueError):
        propagate(np.zeros((1, 3)), [], 5.0, 0.1)


@given(st.integers(1, 15), st.integers(1, 15), st.integers(0, 1000))
def test_propagation_composes(k1, k2, seed):
    rng = np.random.default_rng(seed)
    X0 = rng.uniform(-50, 50, size=(2, 3))
    U = rng.uniform(-1.5, 1.5, size=(k1 + k2, 2))
    whole = propagate(X0, U, 5.0, 0.1).states
    first = propagate(X0, U[:k1], 5.0, 0.1).states
    second = propagate(first[-1], U[k1:], 5.0, 0.1).states
    assert np.array_equal(whole[-1], second[-1])


def test_vehicles_are_decoupled():
    rng = np.random.default_rng(2)
    X0 = rng.uniform(0, 100, size=(3, 3))
    U = rng.uniform(-1, 1, size=(25, 3))
    joint = propagate(X0, U, 5.0, 0.1).states
    for i in range(3):
        alone = propagate(X0[i : i + 1], U[:, i : i + 1], 5.0, 0.1).states
        assert np.array_equal(joint[:, i], alone[:, 0])


def test_wrap_angle_examples():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(7.5 * math.pi) == pytest.approx(-0.5 * math.pi, abs=1e-12)
    with pytest.raises(ValueError):
        wrap_angle(math.inf)


@given(angles)
def test_wrap_angle_range_and_congruence(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    k = (theta - w) / (2 * math.pi)
    assert abs(k - round(k)) < 1e-9


@given(arrays(np.float64, 6, elements=angles))
def test_wrap_angle_array_matches_scalar(th):
    out = wrap_angle(th)
    assert np.allclose(out, [wrap_angle(t) for t in th], atol=0.0)


@given(st.integers(0, 10_000))
def test_step_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-10, 10, size=(2, 3))
    X[:, 2] = rng.uniform(-3, 3, size=2)
    v = np.array([5.0, 0.0])
    F = step_jacobian(X, v, 0.1)
    omega = np.zeros(2)

    def f(z):
        Y = z.reshape(2, 3).copy()
        out = Y.copy()
        out[:, 0] += 0.1 * v * np.cos(Y[:, 2])
        out[:, 1] += 0.1 * v * np.sin(Y[:, 2])
        return out.ravel()

    assert np.allclose(F, finite_diff_jacobian(f, X.ravel()), atol=1e-8)
    # positions agree with the wrapped stepping function
    assert np.allclose(step_array(X, omega, v, 0.1)[:, :2], f(X.ravel()).reshape(2, 3)[:, :2])
