"""Scenario layouts used by the experiments and the acceptance suite."""

from __future__ import annotations

import math

from .world import Landmark, Scenario, VehicleTask, VehicleState

# landmarks clustered along the top edge of the arena; uniform draws over
# x in [40, 160], y in [170, 200] kept at full precision because the
# cooperative closed loop is sensitive to centimetre-level layout changes
TOP_CLUSTER = (
    (115.01145599256003, 179.0909728045794),
    (147.66565611634906, 178.3527683630232),
    (133.0822828294232, 177.64608762962374),
    (67.02486279887103, 183.3522891764794),
    (76.01995418934706, 185.1364477687386),
    (144.82641344755143, 186.60492056223478),
    (40.631836547868964, 199.8650085030318),
    (138.54741020593195, 193.77985757641258),
    (135.64833145024556, 188.66537688323487),
    (96.15219434124649, 199.66880443045653),
)


def three_vehicle_scenario(**overrides) -> Scenario:
    """Three crossing missions through 20 uniformly placed landmarks."""
    tasks = (
        VehicleTask(VehicleState(20.0, 20.0, 0.0), (180.0, 180.0)),
        VehicleTask(VehicleState(20.0, 100.0, 0.0), (180.0, 100.0)),
        VehicleTask(VehicleState(100.0, 20.0, 1.5), (100.0, 180.0)),
    )
    return Scenario(vehicles=tasks, random_landmarks=20).replace(**overrides)


def estimator_comparison_scenario(**overrides) -> Scenario:
    """Three-vehicle layout with a 10 m initial position error and a short planner horizon."""
    base = dict(init_pos_std=10.0, init_heading_std=0.1, horizon=0.5)
    base.update(overrides)
    return three_vehicle_scenario(**base)


def cooperation_scenario(**overrides) -> Scenario:
    """Five vehicles in a column below a top landmark cluster, goals along the bottom."""
    ys = (180.0, 155.0, 130.0, 105.0, 80.0)
    gx = (40.0, 70.0, 100.0, 130.0, 160.0)
    tasks = tuple(VehicleTask(VehicleState(100.0, y, -math.pi / 2), (g, 20.0)) for y, g in zip(ys, gx))
    lms = tuple(Landmark(f"T{k}", x, y) for k, (x, y) in enumerate(TOP_CLUSTER))
    base = Scenario(
        vehicles=tasks,
        landmarks=lms,
        sensor_range=30.0,
        horizon=25.0,
        q_diag=(1e-6, 1e-6, 1e-6),
        init_pos_std=0.3,
        init_heading_std=0.02,
        seed=3,
    )
    return base.replace(**overrides)


def connectivity_scenario(**overrides) -> Scenario:
    """Two vehicles far apart, one landmark between them, goals beside the landmark."""
    tasks = (
        VehicleTask(VehicleState(60.0, 100.0, math.pi / 2), (96.0, 104.0)),
        VehicleTask(VehicleState(140.0, 100.0, -math.pi / 2), (104.0, 96.0)),
    )
    base = Scenario(
        vehicles=tasks,
        landmarks=(Landmark("L0", 100.0, 100.0),),
        horizon=5.0,
        init_pos_std=2.0,
        seed=5,
    )
    return base.replace(**overrides)
