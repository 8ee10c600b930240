import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coopnav.world import Landmark, Scenario, VehicleState, VehicleTask

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def straight_scenario():
    """One vehicle heading east with its goal far ahead, no noise."""
    return Scenario(
        vehicles=(VehicleTask(VehicleState(20.0, 100.0, 0.0), (190.0, 100.0)),),
        landmarks=(Landmark("L0", 60.0, 120.0), Landmark("L1", 100.0, 80.0)),
        process_noise=False,
        measurement_noise=False,
        init_pos_std=0.0,
        init_heading_std=0.0,
        horizon=1.0,
    )


def random_poses(rng: np.random.Generator, n: int) -> np.ndarray:
    X = np.empty((n, 3))
    X[:, :2] = rng.uniform(0.0, 200.0, size=(n, 2))
    X[:, 2] = rng.uniform(-math.pi, math.pi, size=n)
    return X


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)`` returns ``ok``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
