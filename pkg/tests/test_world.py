import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopnav.world import (
    Landmark,
    RngStream,
    Scenario,
    ScenarioError,
    VehicleState,
    VehicleTask,
    attr_for,
    dump_scenario,
    gaussian,
    key_for,
    load_scenario,
    place_landmarks,
)

MINIMAL = """
version: 1
vehicles:
  - source: {x_m: 10, y_m: 10, psi_rad: 0}
    destination: {x_m: 150, y_m: 150}
landmarks:
  - {id: A, x_m: 50, y_m: 60}
  - {id: B, x_m: 90, y_m: 20}
"""


def test_minimal_config_gets_defaults():
    s = load_scenario(MINIMAL)
    assert s.n_vehicles == 1
    assert len(s.landmarks) == 2
    assert s.weight == 10000.0
    assert s.sensor_range == 50.0
    assert s.eta == 2.0


def test_rs_must_exceed_rho():
    with pytest.raises(ScenarioError, match="Rs must exceed rho"):
        load_scenario(MINIMAL + "sensor_range_m: 10\nrho_m: 10\n")


def test_random_landmarks_are_placed_in_arena():
    tasks = tuple(VehicleTask(VehicleState(10.0 * i + 5, 5.0, 0.0), (150.0, 150.0)) for i in range(3))
    s = place_landmarks(Scenario(vehicles=tasks, random_landmarks=20), RngStream(4).child("placement"))
    assert s.n_vehicles == 3
    assert len(s.landmarks) == 20
    for lm in s.landmarks:
        assert 0.0 <= lm.x <= 200.0 and 0.0 <= lm.y <= 200.0


def test_unknown_field_and_missing_coordinate_reported():
    bad = MINIMAL.replace("y_m: 60", "") + "bogus: 1\n"
    with pytest.raises(ScenarioError) as exc:
        load_scenario(bad)
    text = str(exc.value)
    assert "bogus: unknown field" in text
    assert "landmarks[0].y_m: missing" in text


def test_wrong_version_rejected():
    with pytest.raises(ScenarioError, match="version"):
        load_scenario(MINIMAL.replace("version: 1", "version: 7"))


def test_yaml_round_trip_preserves_digest():
    s = load_scenario(MINIMAL + "seed: 9\nq_diag_var: [1e-5, 2e-5, 3e-5]\n")
    again = load_scenario(dump_scenario(s))
    assert again == s
    assert again.digest() == s.digest()
    assert s.replace(seed=10).digest() != s.digest()


def test_key_attr_mapping_is_inverse():
    for key in ("sensor_range_m", "weight_W", "horizon_s", "seed", "weight_mode"):
        assert key_for(attr_for(key)) == key
    with pytest.raises(KeyError):
        attr_for("nonsense")


def test_heading_wrapped_on_construction():
    assert VehicleState(0.0, 0.0, 3 * math.pi).psi == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        VehicleState(math.nan, 0.0, 0.0)


def test_gaussian_zero_variance_is_mean():
    assert gaussian(RngStream(3), 0.0, 0.0) == 0.0


def test_gaussian_sample_moments():
    rng = RngStream(11)
    draws = np.array([gaussian(rng, 0.0, 0.01) for _ in range(100_000)])
    assert abs(draws.mean()) <= 0.002
    assert draws.var() == pytest.approx(0.01, rel=0.05)


def test_child_streams_are_independent_of_draw_order():
    root = RngStream(5)
    a = root.child("measurement").standard_normal(4)
    root2 = RngStream(5)
    root2.child("process").standard_normal(100)
    b = root2.child("measurement").standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RngStream(5).child("process").standard_normal(4))


@given(st.integers(0, 2**32), st.text(min_size=1, max_size=8))
def test_clone_replays_stream(seed, label):
    rng = RngStream(seed).child(label)
    rng.standard_normal(3)
    twin = rng.clone()
    assert np.array_equal(rng.standard_normal(5), twin.standard_normal(5))


def test_vehicle_outside_arena_and_duplicate_ids_rejected():
    s = Scenario(
        vehicles=(VehicleTask(VehicleState(500.0, 10.0, 0.0), (20.0, 20.0)),),
        landmarks=(Landmark("A", 5.0, 10.0), Landmark("A", 50.0, 10.0)),
    )
    with pytest.raises(ScenarioError) as exc:
        s.validate()
    assert "vehicles[0].source: outside arena" in str(exc.value)
    assert "ids must be unique" in str(exc.value)
