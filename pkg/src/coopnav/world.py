"""Domain types, scenario configuration and seeded randomness.

Scenario files are YAML documents with unit-suffixed keys. Every tunable has a
default, so a minimal file only lists vehicles and landmarks::

    version: 1
    vehicles:
      - source: {x_m: 10, y_m: 10, psi_rad: 0.0}
        destination: {x_m: 190, y_m: 190}
    landmarks:
      - {id: a, x_m: 50, y_m: 60}

Random streams are numpy ``PCG64`` generators. A child stream for a consumer
label is seeded with ``SeedSequence(entropy=seed, spawn_key=(crc32(label),))``
so adding a consumer never shifts the draws of another one. Gaussian samples
come from ``Generator.standard_normal`` (ziggurat).
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import zlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Raised for malformed or invalid scenario documents."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _wrap(theta: float) -> float:
    # local copy so world has no intra-package imports
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    psi: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")
        object.__setattr__(self, "psi", _wrap(float(self.psi)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi])


@dataclass(frozen=True)
class ControlInput:
    omega: float

    def clamped(self, omega_min: float, omega_max: float) -> "ControlInput":
        return ControlInput(min(max(self.omega, omega_min), omega_max))


@dataclass(frozen=True)
class Landmark:
    id: str
    x: float
    y: float


@dataclass(frozen=True)
class VehicleTask:
    source: VehicleState
    destination: tuple[float, float]


@dataclass(frozen=True)
class Scenario:
    vehicles: tuple[VehicleTask, ...]
    landmarks: tuple[Landmark, ...] = ()
    # landmarks drawn uniformly in the arena from the placement stream when > 0
    random_landmarks: int = 0
    speed: float = 5.0
    dt: float = 0.1
    sensor_range: float = 50.0
    eta: float = 2.0
    kappa: float = 5.0
    rho: float = 0.5
    weight: float = 10000.0
    sigma_c: float = 3.0
    gamma: float = 0.01
    q_diag: tuple[float, float, float] = (1e-4, 1e-4, 1e-4)
    horizon: float = 25.0
    control_block: int = 5
    mhe_horizon: int = 20
    omega_min: float = -math.pi / 2
    omega_max: float = math.pi / 2
    goal_radius: float = 3.0
    arena: tuple[float, float, float, float] = (0.0, 200.0, 0.0, 200.0)
    init_pos_std: float = 1.0
    init_heading_std: float = 0.05
    process_noise: bool = True
    measurement_noise: bool = True
    weight_mode: str = "frozen"
    normalization: str = "reference"
    max_hops: int = 0
    seed: int = 0

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def horizon_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def arena_diagonal(self) -> float:
        x0, x1, y0, y1 = self.arena
        return math.hypot(x1 - x0, y1 - y0)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "Scenario":
        problems = validation_problems(self)
        if problems:
            raise ScenarioError(problems)
        return self

    def digest(self) -> str:
        return hashlib.sha256(dump_scenario(self).encode()).hexdigest()[:16]


# YAML key <-> Scenario attribute for the scalar tunables
_KEYS: dict[str, str] = {
    "random_landmarks": "random_landmarks",
    "speed_mps": "speed",
    "step_s": "dt",
    "sensor_range_m": "sensor_range",
    "eta": "eta",
    "kappa": "kappa",
    "rho_m": "rho",
    "weight_W": "weight",
    "sigma_c_m": "sigma_c",
    "gamma_rad2": "gamma",
    "horizon_s": "horizon",
    "control_block_steps": "control_block",
    "mhe_horizon_steps": "mhe_horizon",
    "omega_min_radps": "omega_min",
    "omega_max_radps": "omega_max",
    "goal_radius_m": "goal_radius",
    "init_pos_std_m": "init_pos_std",
    "init_heading_std_rad": "init_heading_std",
    "process_noise": "process_noise",
    "measurement_noise": "measurement_noise",
    "weight_mode": "weight_mode",
    "normalization": "normalization",
    "max_hops": "max_hops",
    "seed": "seed",
}
_ATTR_TO_KEY = {v: k for k, v in _KEYS.items()}
INT_FIELDS = {"random_landmarks", "control_block", "mhe_horizon", "max_hops", "seed"}
# symbol-style shorthands accepted on the command line
ALIASES = {"v": "speed", "Ts": "dt", "Rs": "sensor_range", "W": "weight", "tau_h": "horizon", "N_E": "mhe_horizon", "N_c": "control_block"}


def key_for(attr: str) -> str:
    """YAML key of a Scenario attribute (accepts the key itself too)."""
    if attr in _KEYS:
        return attr
    return _ATTR_TO_KEY[attr]


def attr_for(key: str) -> str:
    if key in ALIASES:
        return ALIASES[key]
    if key in _KEYS:
        return _KEYS[key]
    if key in _ATTR_TO_KEY or key in ("q_diag", "arena"):
        return key
    if key in ("q_diag_var", "arena_m"):
        return {"q_diag_var": "q_diag", "arena_m": "arena"}[key]
    raise KeyError(key)


def validation_problems(s: Scenario) -> list[str]:
    p = []
    if s.dt <= 0:
        p.append("step_s: must be > 0")
    if not s.rho >= 0:
        p.append("rho_m: must be >= 0")
    if not s.sensor_range > s.rho:
        p.append("sensor_range_m: Rs must exceed rho")
    if s.eta < 2:
        p.append("eta: must be >= 2")
    if s.weight < 0:
        p.append("weight_W: must be >= 0")
    if s.sigma_c <= 0:
        p.append("sigma_c_m: must be > 0")
    if s.gamma <= 0:
        p.append("gamma_rad2: must be > 0")
    if any(q < 0 for q in s.q_diag):
        p.append("q_diag_var: entries must be >= 0")
    if s.horizon < s.dt:
        p.append("horizon_s: must be >= step_s")
    if s.mhe_horizon < 1:
        p.append("mhe_horizon_steps: must be >= 1")
    if s.control_block < 1:
        p.append("control_block_steps: must be >= 1")
    if s.omega_min > s.omega_max:
        p.append("omega_min_radps: must not exceed omega_max_radps")
    if s.speed <= 0:
        p.append("speed_mps: must be > 0")
    if s.kappa <= 0:
        p.append("kappa: must be > 0")
    if s.goal_radius < 0:
        p.append("goal_radius_m: must be >= 0")
    if s.random_landmarks < 0:
        p.append("random_landmarks: must be >= 0")
    if s.weight_mode not in ("predictive", "frozen"):
        p.append("weight_mode: must be 'predictive' or 'frozen'")
    if s.normalization not in ("reference", "horizon"):
        p.append("normalization: must be 'reference' or 'horizon'")
    if not s.vehicles:
        p.append("vehicles: at least one vehicle required")
    x0, x1, y0, y1 = s.arena
    if not (x0 < x1 and y0 < y1):
        p.append("arena_m: must be [xmin, xmax, ymin, ymax] with min < max")

    def inside(x, y):
        return x0 <= x <= x1 and y0 <= y <= y1

    for i, v in enumerate(s.vehicles):
        if not inside(v.source.x, v.source.y):
            p.append(f"vehicles[{i}].source: outside arena")
        if not inside(*v.destination):
            p.append(f"vehicles[{i}].destination: outside arena")
    ids = [lm.id for lm in s.landmarks]
    if len(set(ids)) != len(ids):
        p.append("landmarks: ids must be unique")
    for j, lm in enumerate(s.landmarks):
        if not (math.isfinite(lm.x) and math.isfinite(lm.y)):
            p.append(f"landmarks[{j}]: non-finite position")
    return p


def _num(doc: dict, key: str, path: str, problems: list[str]) -> float | None:
    try:
        return float(doc[key])
    except KeyError:
        problems.append(f"{path}.{key}: missing")
    except (TypeError, ValueError):
        problems.append(f"{path}.{key}: not a number")
    return None


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("document root must be a mapping")
    problems: list[str] = []
    if doc.get("version") != SCENARIO_VERSION:
        problems.append(f"version: expected {SCENARIO_VERSION}, got {doc.get('version')!r}")

    vehicles = []
    for i, v in enumerate(doc.get("vehicles") or []):
        src = v.get("source", {}) if isinstance(v, dict) else {}
        dst = v.get("destination", {}) if isinstance(v, dict) else {}
        x = _num(src, "x_m", f"vehicles[{i}].source", problems)
        y = _num(src, "y_m", f"vehicles[{i}].source", problems)
        psi = float(src.get("psi_rad", 0.0))
        dx = _num(dst, "x_m", f"vehicles[{i}].destination", problems)
        dy = _num(dst, "y_m", f"vehicles[{i}].destination", problems)
        if None not in (x, y, dx, dy):
            vehicles.append(VehicleTask(VehicleState(x, y, psi), (dx, dy)))

    landmarks = []
    for j, lm in enumerate(doc.get("landmarks") or []):
        x = _num(lm, "x_m", f"landmarks[{j}]", problems)
        y = _num(lm, "y_m", f"landmarks[{j}]", problems)
        if x is not None and y is not None:
            landmarks.append(Landmark(str(lm.get("id", f"L{j}")), x, y))

    kwargs: dict[str, Any] = {}
    for key, attr in _KEYS.items():
        if key in doc:
            val = doc[key]
            try:
                if attr in INT_FIELDS:
                    val = int(val)
                elif attr in ("process_noise", "measurement_noise"):
                    val = bool(val)
                elif attr not in ("weight_mode", "normalization"):
                    val = float(val)
            except (TypeError, ValueError):
                problems.append(f"{key}: bad value {val!r}")
                continue
            kwargs[attr] = val
    if "q_diag_var" in doc:
        q = doc["q_diag_var"]
        if isinstance(q, (int, float)):
            q = [q] * 3
        if len(q) != 3:
            problems.append("q_diag_var: needs 3 entries (x, y, psi)")
        else:
            kwargs["q_diag"] = tuple(float(a) for a in q)
    if "arena_m" in doc:
        a = doc["arena_m"]
        if len(a) != 4:
            problems.append("arena_m: needs [xmin, xmax, ymin, ymax]")
        else:
            kwargs["arena"] = tuple(float(b) for b in a)
    unknown = set(doc) - set(_KEYS) - {"version", "vehicles", "landmarks", "q_diag_var", "arena_m"}
    for k in sorted(unknown):
        problems.append(f"{k}: unknown field")
    if problems:
        raise ScenarioError(problems)
    return Scenario(vehicles=tuple(vehicles), landmarks=tuple(landmarks), **kwargs).validate()


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"parse error: {exc}") from exc
    return scenario_from_dict(doc)


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    doc: dict[str, Any] = {"version": SCENARIO_VERSION}
    doc["vehicles"] = [
        {
            "source": {"x_m": v.source.x, "y_m": v.source.y, "psi_rad": v.source.psi},
            "destination": {"x_m": v.destination[0], "y_m": v.destination[1]},
        }
        for v in s.vehicles
    ]
    doc["landmarks"] = [{"id": lm.id, "x_m": lm.x, "y_m": lm.y} for lm in s.landmarks]
    for key, attr in _KEYS.items():
        doc[key] = getattr(s, attr)
    doc["q_diag_var"] = list(s.q_diag)
    doc["arena_m"] = list(s.arena)
    return doc


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False)


def place_landmarks(s: Scenario, rng: "RngStream") -> Scenario:
    """Return ``s`` with ``random_landmarks`` uniform draws appended to its landmarks."""
    if s.random_landmarks <= 0:
        return s
    x0, x1, y0, y1 = s.arena
    pts = rng.uniform(size=(s.random_landmarks, 2))
    extra = tuple(
        Landmark(f"R{k}", x0 + (x1 - x0) * u, y0 + (y1 - y0) * w) for k, (u, w) in enumerate(pts)
    )
    return s.replace(landmarks=s.landmarks + extra, random_landmarks=0)


@dataclass
class RngStream:
    """Single-owner seeded stream; ``child`` derives label-keyed substreams."""

    seed: int
    label: str = ""
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        key = (zlib.crc32(self.label.encode()),) if self.label else ()
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, label: str) -> "RngStream":
        full = f"{self.label}/{label}" if self.label else label
        return RngStream(self.seed, full)

    def clone(self) -> "RngStream":
        twin = RngStream(self.seed, self.label)
        twin._gen.bit_generator.state = self._gen.bit_generator.state
        return twin

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)


def gaussian(rng: RngStream, mean: float, variance: float) -> float:
    if variance < 0:
        raise ValueError(f"negative variance {variance}")
    z = rng.standard_normal()
    if variance == 0:
        return float(mean)
    return float(mean + math.sqrt(variance) * z)
