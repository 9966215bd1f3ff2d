import math

import pytest

from ampc.collision import RoadGeometry
from ampc.dynamics import VehicleState
from ampc.errors import ConfigError, ScenarioError
from ampc.scenarios import (REFERENCE_SCENARIOS, ObstacleSpec, ScenarioConfig, bundled, corridor_free, loads,
                            random_scenarios, scenario_lane_change, scenario_occluded_overtake,
                            scenario_sudden_brake)

MINIMAL = """
name = "mini"
duration = 2.0
[ego]
v = 10.0
"""


class TestReferenceScenarios:
    def test_occluded_overtake(self):
        sc = scenario_occluded_overtake()
        assert sc.ego.v == 15.0
        hidden = [o for o in sc.obstacles if o.visible_from > 0]
        assert len(hidden) == 1
        assert hidden[0].y == sc.road.lane_center(1)
        van = [o for o in sc.obstacles if o.visible_from == 0][0]
        assert van.y == sc.ego.y and van.x > sc.ego.x and van.speed < sc.ego.v

    def test_lane_change(self):
        sc = scenario_lane_change()
        assert sc.ego.v == 10.0
        assert sc.goal_y == sc.road.lane_center(1)
        (rear,) = sc.obstacles
        assert rear.speed == 15.0 and rear.y == sc.goal_y
        assert rear.x < sc.ego.x

    def test_sudden_brake(self):
        sc = scenario_sudden_brake()
        (lead,) = sc.obstacles
        assert sc.ego.v == lead.speed == 15.0
        assert all(abs(a) <= 6.0 for _, _, a in lead.segments)
        assert all(a < 0 for _, _, a in lead.segments)
        brake_end = max(t1 for _, t1, _ in lead.segments)
        assert sc.duration >= brake_end + 5.0

    @pytest.mark.parametrize("name", REFERENCE_SCENARIOS)
    def test_bundled_files_validate(self, name):
        sc = bundled(name)
        assert sc.name == name
        assert sc.transitions and all(len(w) == 3 for w in sc.transitions)
        assert sc.road.y_min <= sc.goal_y <= sc.road.y_max


class TestLoading:
    def test_defaults(self):
        sc = loads(MINIMAL)
        assert sc.road.lanes == 2 and sc.goal_y == 0.0 and sc.goal_speed == 10.0

    @pytest.mark.parametrize("text", [
        MINIMAL + "speed_limit = 3\n",
        MINIMAL.replace("v = 10.0", "v = 10.0\nvv = 1"),
        MINIMAL + "[[obstacles]]\nx = 5\ny = 0\nsped = 4\n",
        MINIMAL + "[limits]\nvmax = 4\n",
    ])
    def test_unknown_keys_are_errors(self, text):
        with pytest.raises(ConfigError, match="unknown key"):
            loads(text)

    def test_parse_error_names_line(self):
        with pytest.raises(ConfigError, match="line"):
            loads("name = \nduration = 1")

    def test_wrong_type(self):
        with pytest.raises(ConfigError, match="duration"):
            loads(MINIMAL.replace("duration = 2.0", 'duration = "long"'))

    def test_transition_target(self):
        sc = loads('transitions = [[1.0, 2.0, 12.0], [3.0, 4.0]]\n' + MINIMAL)
        assert sc.transitions == ((1.0, 2.0, 12.0), (3.0, 4.0))
        with pytest.raises(ConfigError, match="transitions"):
            loads('transitions = [[2.0, 1.0]]\n' + MINIMAL)

    def test_missing_name(self):
        with pytest.raises(ConfigError, match="name"):
            loads("duration = 1.0\n[ego]\nv = 1.0\n")


class TestValidation:
    road = RoadGeometry(2, 3.5, 200.0, -50.0)

    def make(self, **kw):
        base = dict(name="t", duration=5.0, road=self.road, ego=VehicleState(v=10.0), goal_y=0.0, goal_speed=10.0)
        base.update(kw)
        return ScenarioConfig(**base)

    def test_ego_off_road(self):
        with pytest.raises(ScenarioError):
            self.make(ego=VehicleState(y=10.0, v=10.0))

    def test_obstacle_leaves_road(self):
        with pytest.raises(ScenarioError):
            self.make(obstacles=(ObstacleSpec("fast", 100.0, 0.0, 0.0, 30.0),))

    def test_bad_limits(self):
        with pytest.raises(ScenarioError):
            self.make(a_min=1.0)
        with pytest.raises(ScenarioError):
            self.make(duration=math.nan)


class TestRandomSuite:
    def test_deterministic(self):
        a, b = random_scenarios(3, 5), random_scenarios(3, 5)
        assert a == b
        assert random_scenarios(4, 5) != a

    def test_empty(self):
        assert random_scenarios(0, 0) == []

    def test_valid_and_open(self):
        suite = random_scenarios(0, 20)
        assert len(suite) == 20
        assert len({s.name for s in suite}) == 20
        for sc in suite:
            assert 1 <= len(sc.obstacles) <= 3
            assert corridor_free(sc)

    def test_corridor_check_rejects_wall(self):
        wall = (ObstacleSpec("a", 30.0, 0.0), ObstacleSpec("b", 30.0, 3.5))
        sc = ScenarioConfig("wall", 2.0, RoadGeometry(2, 3.5, 200.0, -50.0), VehicleState(v=10.0), 0.0, 10.0,
                            obstacles=wall)
        assert not corridor_free(sc)
