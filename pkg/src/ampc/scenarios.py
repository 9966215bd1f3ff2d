"""Benchmark scenarios: TOML files, the three reference scenes and a random suite.

Schema (unknown keys are errors)::

    name = "sudden_brake"          # required
    duration = 12.0                # seconds, required
    transitions = [[2.5, 9.0, 12.0]]   # optional metric windows [t_start, t_end, target speed]

    [road]      lanes, lane_width, length, x_start
    [ego]       x, y, theta, v
    [goal]      lane (or y), speed, heading
    [limits]    v_max, a_max, a_min
    [actuator]  tau, omega_n, zeta            # plant/planner defaults
    [[obstacles]]
        id, x, y, heading, speed, radius, offsets, visible_from,
        segments = [[t_start, t_end, accel], ...]
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .collision import MotionScript, Obstacle, RoadGeometry, road_boundary_obstacles
from .dynamics import ConstantTau, FirstOrder, LinearRamp, SecondOrder, VehicleState
from .errors import ConfigError, ScenarioError
from .planner.config import PlannerConfig

EGO_RADIUS = 1.0
EGO_OFFSETS = (-1.5, 0.0, 1.5)

_TOP = {"name", "duration", "transitions", "road", "ego", "goal", "limits", "actuator", "obstacles"}
_SECTIONS = {
    "road": {"lanes", "lane_width", "length", "x_start"},
    "ego": {"x", "y", "theta", "v"},
    "goal": {"lane", "y", "speed", "heading"},
    "limits": {"v_max", "a_max", "a_min"},
    "actuator": {"tau", "omega_n", "zeta"},
}
_OBSTACLE_KEYS = {"id", "x", "y", "heading", "speed", "radius", "offsets", "visible_from", "segments"}


@dataclass(frozen=True)
class ObstacleSpec:
    id: str
    x: float
    y: float
    heading: float = 0.0
    speed: float = 0.0
    radius: float = 1.0
    offsets: tuple = EGO_OFFSETS
    visible_from: float = 0.0
    segments: tuple = ()

    def build(self, ego_radius: float = EGO_RADIUS) -> Obstacle:
        script = MotionScript(self.x, self.y, self.heading, self.speed, tuple(tuple(s) for s in self.segments))
        return Obstacle(self.id, script, self.radius + ego_radius, self.visible_from, tuple(self.offsets))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    duration: float
    road: RoadGeometry
    ego: VehicleState
    goal_y: float
    goal_speed: float
    goal_heading: float = 0.0
    v_max: float = 25.0
    a_max: float = 4.0
    a_min: float = -6.0
    tau: float = 0.5
    omega_n: float = 2.0
    zeta: float = 0.7
    obstacles: tuple = ()
    transitions: tuple = ()

    def __post_init__(self):
        validate(self)

    def vehicles(self) -> list[Obstacle]:
        return [o.build() for o in self.obstacles]

    def all_obstacles(self) -> list[Obstacle]:
        """Scripted vehicles followed by the road-edge circles."""
        return self.vehicles() + road_boundary_obstacles(self.road, EGO_RADIUS)

    def planner_config(self, model: str = "first-order", tau: float | None = None, **overrides) -> PlannerConfig:
        base = dict(v_max=self.v_max, a_max=self.a_max, a_min=self.a_min, model=model,
                    tau_schedule=ConstantTau(self.tau if tau is None else tau),
                    goal=(self.ego.x, self.goal_y, self.goal_heading),
                    ego_offsets=EGO_OFFSETS, ego_radius=EGO_RADIUS)
        base.update(overrides)
        return PlannerConfig(**base)

    def goal_fn(self, config: PlannerConfig):
        """Carrot goal: the goal lane, ``goal_speed * horizon`` ahead of the ego."""
        lead = self.goal_speed * config.N * config.dt
        y, h = self.goal_y, self.goal_heading

        def goal(ego: VehicleState, t: float):
            return (ego.x + lead, y, h)
        return goal

    def plant(self, kind: str):
        if kind == "first-order":
            return FirstOrder(self.tau)
        if kind == "linear":
            return LinearRamp()
        if kind == "second-order":
            return SecondOrder(self.omega_n, self.zeta)
        raise ConfigError(f"unknown plant {kind!r}")


def validate(sc: ScenarioConfig) -> None:
    """Check limits and that every scripted vehicle stays on the road for the whole run."""
    if not (sc.duration >= 0 and math.isfinite(sc.duration)):
        raise ScenarioError(f"{sc.name}: duration must be a finite non-negative number")
    if not (sc.a_min < 0 < sc.a_max and sc.v_max > 0):
        raise ScenarioError(f"{sc.name}: need a_min < 0 < a_max and v_max > 0")
    if sc.tau <= 0 or sc.omega_n <= 0 or sc.zeta <= 0:
        raise ScenarioError(f"{sc.name}: actuator parameters must be positive")
    lo, hi = sc.road.y_min, sc.road.y_max
    if not lo <= sc.ego.y <= hi:
        raise ScenarioError(f"{sc.name}: ego starts off the road")
    if not lo <= sc.goal_y <= hi:
        raise ScenarioError(f"{sc.name}: goal is off the road")
    x_end = sc.road.x_start + sc.road.length
    ts = np.linspace(0.0, sc.duration, max(2, int(sc.duration * 10) + 1))
    for spec in sc.obstacles:
        ob = spec.build()
        for t in ts:
            c = ob.circles_at(float(t))
            if np.any(c[:, 1] < lo) or np.any(c[:, 1] > hi) or np.any(c[:, 0] < sc.road.x_start) \
                    or np.any(c[:, 0] > x_end):
                raise ScenarioError(f"{sc.name}: obstacle {spec.id} leaves the road at t={t:.1f}")
        for seg in spec.segments:
            if len(seg) != 3 or seg[1] < seg[0]:
                raise ScenarioError(f"{sc.name}: obstacle {spec.id}: segments are [t_start, t_end, accel]")


# --- TOML loading ------------------------------------------------------------

def _check_keys(table: dict, allowed: set, where: str):
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(extra))}")


def _num(table, key, where, default=None):
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def from_dict(data: dict, source: str = "<scenario>") -> ScenarioConfig:
    _check_keys(data, _TOP, source)
    for sec, keys in _SECTIONS.items():
        if sec in data:
            if not isinstance(data[sec], dict):
                raise ConfigError(f"{source}: [{sec}] must be a table")
            _check_keys(data[sec], keys, f"{source}: [{sec}]")
    if "name" not in data or not isinstance(data["name"], str):
        raise ConfigError(f"{source}: missing required field 'name'")
    road_t = data.get("road", {})
    road = RoadGeometry(int(_num(road_t, "lanes", "road", 2)), _num(road_t, "lane_width", "road", 3.5),
                        _num(road_t, "length", "road", 400.0), _num(road_t, "x_start", "road", -50.0))
    ego_t = data.get("ego", {})
    ego = VehicleState(_num(ego_t, "x", "ego", 0.0), _num(ego_t, "y", "ego", 0.0),
                       _num(ego_t, "theta", "ego", 0.0), 0.0, _num(ego_t, "v", "ego"))
    goal_t = data.get("goal", {})
    if "lane" in goal_t and "y" in goal_t:
        raise ConfigError(f"{source}: [goal] give either 'lane' or 'y', not both")
    goal_y = road.lane_center(int(_num(goal_t, "lane", "goal"))) if "lane" in goal_t else _num(goal_t, "y", "goal", ego.y)
    lim = data.get("limits", {})
    act = data.get("actuator", {})
    obs = []
    raw = data.get("obstacles", [])
    if not isinstance(raw, list):
        raise ConfigError(f"{source}: 'obstacles' must be an array of tables")
    for i, o in enumerate(raw):
        where = f"{source}: obstacles[{i}]"
        if not isinstance(o, dict):
            raise ConfigError(f"{where}: expected a table")
        _check_keys(o, _OBSTACLE_KEYS, where)
        segs = o.get("segments", [])
        if not all(isinstance(s, list) and len(s) == 3 for s in segs):
            raise ConfigError(f"{where}.segments: expected [[t_start, t_end, accel], ...]")
        obs.append(ObstacleSpec(str(o.get("id", f"obstacle-{i}")), _num(o, "x", where), _num(o, "y", where),
                                _num(o, "heading", where, 0.0), _num(o, "speed", where, 0.0),
                                _num(o, "radius", where, 1.0), tuple(float(v) for v in o.get("offsets", EGO_OFFSETS)),
                                _num(o, "visible_from", where, 0.0),
                                tuple(tuple(float(v) for v in s) for s in segs)))
    trans = tuple(tuple(float(v) for v in w) for w in data.get("transitions", []))
    if any(len(w) not in (2, 3) or w[1] <= w[0] for w in trans):
        raise ConfigError(f"{source}: transitions are [t_start, t_end] or [t_start, t_end, target_speed]")
    return ScenarioConfig(
        name=data["name"], duration=_num(data, "duration", source), road=road, ego=ego, goal_y=goal_y,
        goal_speed=_num(goal_t, "speed", "goal", ego.v), goal_heading=_num(goal_t, "heading", "goal", 0.0),
        v_max=_num(lim, "v_max", "limits", 25.0), a_max=_num(lim, "a_max", "limits", 4.0),
        a_min=_num(lim, "a_min", "limits", -6.0), tau=_num(act, "tau", "actuator", 0.5),
        omega_n=_num(act, "omega_n", "actuator", 2.0), zeta=_num(act, "zeta", "actuator", 0.7),
        obstacles=tuple(obs), transitions=trans)


def loads(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return from_dict(data, source)


def load(path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    return loads(path.read_text(), str(path))


def bundled(name: str) -> ScenarioConfig:
    text = resources.files("ampc.data").joinpath(f"{name}.toml").read_text()
    return loads(text, f"{name}.toml")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("ampc.data").joinpath(f"{name}.toml")))


def scenario_occluded_overtake() -> ScenarioConfig:
    return bundled("occluded_overtake")


def scenario_lane_change() -> ScenarioConfig:
    return bundled("lane_change")


def scenario_sudden_brake() -> ScenarioConfig:
    return bundled("sudden_brake")


REFERENCE_SCENARIOS = ("occluded_overtake", "lane_change", "sudden_brake")


# --- random suite ------------------------------------------------------------

def corridor_free(sc: ScenarioConfig, cell: float = 2.0, horizon: float | None = None) -> bool:
    """Coarse grid check that some lane stays open at every distance ahead.

    The road is cut into ``cell``-metre slices; a lane is blocked in a slice
    when any scripted vehicle circle (inflated by the combined radius) covers
    its centre line there at some sampled time.  The suite only keeps scenes
    where no slice has every lane blocked at once.
    """
    horizon = sc.duration if horizon is None else horizon
    ts = np.arange(0.0, horizon + 1e-9, 0.5)
    lanes = [sc.road.lane_center(i) for i in range(sc.road.lanes)]
    for t in ts:
        xs = np.arange(sc.road.x_start, sc.road.x_start + sc.road.length, cell)
        blocked = np.zeros((xs.size, len(lanes)), dtype=bool)
        for spec in sc.obstacles:
            ob = spec.build()
            c = ob.circles_at(float(t))
            for j, ly in enumerate(lanes):
                near = np.abs(c[:, 1] - ly) < ob.radius_combined
                for cx in c[near, 0]:
                    blocked[np.abs(xs - cx) < ob.radius_combined + cell, j] = True
        if np.any(blocked.all(axis=1)):
            return False
    return True


def random_scenarios(seed: int, count: int, duration: float = 8.0) -> list[ScenarioConfig]:
    """Deterministic suite of two-lane scenes with 1-3 static or slow vehicles ahead."""
    rng = np.random.default_rng(seed)
    out = []
    road = RoadGeometry(2, 3.5, 400.0, -50.0)
    while len(out) < count:
        i = len(out)
        ego_lane = int(rng.integers(0, 2))
        v0 = float(rng.uniform(8.0, 15.0))
        obs = []
        for j in range(int(rng.integers(1, 4))):
            lane = int(rng.integers(0, 2))
            moving = rng.random() < 0.5
            obs.append(ObstacleSpec(f"r{i}-{j}", float(rng.uniform(20.0, 70.0)), road.lane_center(lane), 0.0,
                                    float(rng.uniform(3.0, 8.0)) if moving else 0.0))
        try:
            sc = ScenarioConfig(f"random-{seed}-{i}", duration, road,
                                VehicleState(0.0, road.lane_center(ego_lane), 0.0, 0.0, v0),
                                road.lane_center(ego_lane), float(rng.uniform(10.0, 15.0)),
                                obstacles=tuple(obs))
        except ScenarioError:
            continue
        if corridor_free(sc):
            out.append(sc)
    return out
