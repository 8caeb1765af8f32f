import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpfnav.geometry import Circle, Rect, Vec2, WorldParams, nearest_obstacle_point
from rpfnav.metrics import motion_smoothness, traveling_distance
from rpfnav.scenarios import (
    CLUTTER_OBSTACLE_RADIUS,
    Scenario,
    ScenarioError,
    gen_circle_swap,
    gen_cluttered,
    load_scenario,
    save_scenario,
    scenario_from_json,
    scenario_to_json,
)

STEP = 0.05  # v * dt at the default parameters


def straight_trail(length, step=STEP, origin=Vec2(0, 0), direction=Vec2(1, 0)):
    n = round(length / step)
    return [origin + direction * (step * k) for k in range(n + 1)]


def test_traveling_distance_straight_run():
    trail = straight_trail(3.0)
    assert len(trail) == 61  # 60 motion steps
    lengths, mean = traveling_distance([trail])
    assert lengths[0] == pytest.approx(3.0, abs=1e-12)
    assert mean == pytest.approx(3.0, abs=1e-12)


def test_traveling_distance_stationary():
    lengths, mean = traveling_distance([[Vec2(1, 1)]])
    assert lengths == [0.0]
    assert mean == 0.0


def test_traveling_distance_quarter_arc():
    # Unit-radius quarter circle sampled at the cruise step; path length must
    # be within 1% of the analytic arc length pi/2.
    arc = []
    n = round((math.pi / 2) / STEP)
    for k in range(n + 1):
        theta = (math.pi / 2) * k / n
        arc.append(Vec2(math.cos(theta), math.sin(theta)))
    lengths, _ = traveling_distance([arc])
    assert lengths[0] == pytest.approx(math.pi / 2, rel=0.01)


def test_smoothness_constant_heading_is_zero():
    # Zero up to the float noise of accumulating positions along the trail.
    scores, mean = motion_smoothness([straight_trail(2.0)])
    assert scores[0] == pytest.approx(0.0, abs=1e-12)
    assert mean == pytest.approx(0.0, abs=1e-12)


def test_smoothness_alternating_right_angles():
    # Headings alternate +x, +y, +x, ...: every velocity change has norm
    # sqrt(2)*speed, so xi = sqrt(2) * (T-1) / T.
    t_steps = 9
    pos = Vec2(0, 0)
    trail = [pos]
    for k in range(t_steps):
        direction = Vec2(1, 0) if k % 2 == 0 else Vec2(0, 1)
        pos = pos + direction * STEP
        trail.append(pos)
    scores, _ = motion_smoothness([trail])
    assert scores[0] == pytest.approx(math.sqrt(2) * (t_steps - 1) / t_steps,
                                      abs=1e-12)


def test_smoothness_single_turn_chord_formula():
    # One 45-degree turn inside a 100-step run: |dv| = 2 sin(22.5deg) |v|.
    turn_at = 40
    t_steps = 100
    pos = Vec2(0, 0)
    trail = [pos]
    for k in range(t_steps):
        heading = 0.0 if k < turn_at else math.radians(45.0)
        pos = pos + Vec2(math.cos(heading), math.sin(heading)) * STEP
        trail.append(pos)
    scores, _ = motion_smoothness([trail])
    assert scores[0] == pytest.approx(2 * math.sin(math.radians(22.5)) / t_steps,
                                      rel=1e-9)


def test_smoothness_short_trails_score_zero():
    assert motion_smoothness([[Vec2(0, 0), Vec2(1, 0)]])[0] == [0.0]
    assert motion_smoothness([[Vec2(0, 0)]])[0] == [0.0]


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-math.pi, max_value=math.pi),
       st.floats(min_value=-20, max_value=20),
       st.floats(min_value=-20, max_value=20))
def test_metrics_invariant_under_rigid_motion(theta, tx, ty):
    rng = np.random.default_rng(0)
    pos = Vec2(0, 0)
    trail = [pos]
    heading = 0.0
    for _ in range(25):
        heading += float(rng.uniform(-0.5, 0.5))
        pos = pos + Vec2(math.cos(heading), math.sin(heading)) * STEP
        trail.append(pos)
    shift = Vec2(tx, ty)
    moved = [p.rotate(theta) + shift for p in trail]
    base_l, _ = traveling_distance([trail])
    base_x, _ = motion_smoothness([trail])
    new_l, _ = traveling_distance([moved])
    new_x, _ = motion_smoothness([moved])
    assert new_l[0] == pytest.approx(base_l[0], abs=1e-9)
    assert new_x[0] == pytest.approx(base_x[0], abs=1e-9)


def test_traveling_distance_lower_bounded_by_straight_line():
    rng = np.random.default_rng(1)
    start, goal = Vec2(0, 0), Vec2(2, 1)
    # Any trail from start to goal is at least the straight-line distance.
    waypoints = [start] + [Vec2(float(rng.uniform(0, 2)), float(rng.uniform(0, 2)))
                           for _ in range(10)] + [goal]
    lengths, _ = traveling_distance([waypoints])
    assert lengths[0] >= start.distance(goal) - 1e-12


def test_circle_swap_training_arena():
    sc = gen_circle_swap(6, 2.0)
    assert sc.name == "circle6-r2"
    assert len(sc.robots) == 6
    assert sc.obstacles == []
    for start, goal in sc.robots:
        assert start.norm() == pytest.approx(2.0, abs=1e-12)


def test_circle_swap_evaluation_arenas():
    sc3 = gen_circle_swap(8, 3.0)
    sc8 = gen_circle_swap(8, 8.0)
    assert len(sc3.robots) == 8 and len(sc8.robots) == 8
    # Radius 8 puts every pairwise start beyond the 6 m detection range.
    d_r = sc8.params.d_r
    for a in range(8):
        for b in range(a + 1, 8):
            assert sc8.robots[a][0].distance(sc8.robots[b][0]) > d_r


def test_circle_swap_goals_exact_antipodes_without_jitter():
    sc = gen_circle_swap(5, 3.0, rng=None)
    for start, goal in sc.robots:
        assert goal.x == -start.x and goal.y == -start.y


def test_circle_swap_jitter_deterministic_per_seed():
    a = gen_circle_swap(6, 2.0, rng=np.random.default_rng(5))
    b = gen_circle_swap(6, 2.0, rng=np.random.default_rng(5))
    c = gen_circle_swap(6, 2.0, rng=np.random.default_rng(6))
    assert a.robots == b.robots
    assert a.robots != c.robots


def test_circle_swap_needs_two_robots():
    with pytest.raises(ScenarioError):
        gen_circle_swap(1, 2.0)


def test_cluttered_deterministic_per_seed():
    a = gen_cluttered(np.random.default_rng(9))
    b = gen_cluttered(np.random.default_rng(9))
    assert a.robots == b.robots
    assert a.obstacles == b.obstacles


def test_cluttered_layout_and_spacing_sweep():
    params = WorldParams()
    for seed in range(30):
        sc = gen_cluttered(np.random.default_rng(seed))
        circles = [o for o in sc.obstacles if isinstance(o, Circle)]
        rects = [o for o in sc.obstacles if isinstance(o, Rect)]
        assert len(circles) == 36 and len(rects) == 1
        assert all(c.radius == CLUTTER_OBSTACLE_RADIUS for c in circles)
        starts = [s for s, _ in sc.robots]
        for i in range(len(starts)):
            for j in range(i + 1, len(starts)):
                assert starts[i].distance(starts[j]) >= 2 * params.r
        for start, goal in sc.robots:
            for point in (start, goal):
                nearest = nearest_obstacle_point(point, sc.obstacles)
                assert nearest[1] > 0.0


def test_cluttered_small_obstacle_variant():
    sc = gen_cluttered(np.random.default_rng(2), obstacle_radius=0.1)
    circles = [o for o in sc.obstacles if isinstance(o, Circle)]
    assert all(c.radius == 0.1 for c in circles)
    baseline = gen_cluttered(np.random.default_rng(2))
    # Same lattice positions, only the radius changes.
    assert [c.center for c in circles] == \
        [c.center for c in baseline.obstacles if isinstance(c, Circle)]


def test_scenario_json_round_trip(tmp_path):
    sc = gen_cluttered(np.random.default_rng(4), n_robots=3)
    path = tmp_path / "scenario.json"
    save_scenario(path, sc)
    loaded = load_scenario(path)
    assert loaded.name == sc.name
    assert loaded.robots == sc.robots
    assert loaded.obstacles == sc.obstacles
    assert loaded.params == sc.params


def test_scenario_json_rejects_unknown_format():
    with pytest.raises(ScenarioError):
        scenario_from_json({"format": "other"})


def test_scenario_validation_catches_bad_layouts():
    params = WorldParams()
    inside = Scenario("bad", [(Vec2(0, 0), Vec2(5, 5))],
                      [Circle(Vec2(0, 0), 1.0)], params)
    with pytest.raises(ScenarioError):
        inside.validate()
    crowded = Scenario("bad2", [(Vec2(0, 0), Vec2(5, 5)),
                                (Vec2(0.05, 0), Vec2(5, 6))], [], params)
    with pytest.raises(ScenarioError):
        crowded.validate()


def test_scenario_to_json_schema_fields():
    doc = scenario_to_json(gen_circle_swap(3, 2.0))
    assert doc["format"] == "rpfnav-scenario-v1"
    assert set(doc) == {"format", "name", "params", "robots", "obstacles"}
    assert set(doc["robots"][0]) == {"start", "goal"}
