"""Scenario generators and the JSON scenario file format.

Two families: a cluttered arena (a fixed grid of circular obstacles inside
rectangular walls, with randomly sampled starts and goals) and the open
circle-swap task (robots evenly spaced on a circle, each heading to its
antipode). Scenarios serialize to a small JSON document so the CLI can
reload them exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import (
    Circle,
    Obstacle,
    Rect,
    RobotState,
    Vec2,
    World,
    WorldParams,
    nearest_obstacle_point,
)

SCENARIO_FORMAT = "rpfnav-scenario-v1"

# Cluttered-arena layout constants; the published figures give density, not
# coordinates, so the grid is pinned here in one place.
CLUTTER_GRID_N = 6
CLUTTER_PITCH = 2.0
CLUTTER_ARENA_SIDE = 12.0
CLUTTER_OBSTACLE_RADIUS = 0.5
SPAWN_CLEARANCE_FACTOR = 2.0   # min obstacle clearance for starts/goals, in units of r
MAX_SAMPLING_TRIES = 10_000

CIRCLE_SWAP_JITTER = 0.05      # radians of angular jitter when an rng is supplied


class ScenarioError(RuntimeError):
    pass


@dataclass
class Scenario:
    name: str
    robots: list[tuple[Vec2, Vec2]]          # (start, goal) pairs
    obstacles: list[Obstacle]
    params: WorldParams = field(default_factory=WorldParams)

    def validate(self) -> "Scenario":
        self.params.validate()
        r = self.params.r
        for k, (start, goal) in enumerate(self.robots):
            for kind, point in (("start", start), ("goal", goal)):
                nearest = nearest_obstacle_point(point, self.obstacles)
                if nearest is not None and nearest[1] <= 0.0:
                    raise ScenarioError(f"robot {k} {kind} lies inside an obstacle")
        for a in range(len(self.robots)):
            for b in range(a + 1, len(self.robots)):
                if self.robots[a][0].distance(self.robots[b][0]) < 2.0 * r:
                    raise ScenarioError(f"starts of robots {a} and {b} closer than 2r")
        return self

    def build_world(self, seed: int = 0) -> World:
        """Instantiate robots facing their goals, trails at the start point."""
        robots = []
        for k, (start, goal) in enumerate(self.robots):
            offset = goal - start
            heading = offset.angle() if offset.norm() > 0.0 else 0.0
            robots.append(RobotState(id=k, position=start, heading=heading, goal=goal))
        return World(params=self.params, robots=robots,
                     obstacles=list(self.obstacles), seed=seed)


def clutter_obstacles(obstacle_radius: float = CLUTTER_OBSTACLE_RADIUS) -> list[Obstacle]:
    """The fixed lattice: a 6x6 circle grid plus the arena walls."""
    obstacles: list[Obstacle] = [
        Rect(Vec2(0.0, 0.0), Vec2(CLUTTER_ARENA_SIDE, CLUTTER_ARENA_SIDE))
    ]
    offset = (CLUTTER_ARENA_SIDE - (CLUTTER_GRID_N - 1) * CLUTTER_PITCH) / 2.0
    for i in range(CLUTTER_GRID_N):
        for j in range(CLUTTER_GRID_N):
            center = Vec2(offset + i * CLUTTER_PITCH, offset + j * CLUTTER_PITCH)
            obstacles.append(Circle(center, obstacle_radius))
    return obstacles


def _sample_clear_point(
    rng: np.random.Generator,
    obstacles: list[Obstacle],
    clearance: float,
    taken: list[Vec2],
    min_separation: float,
) -> Vec2:
    for _ in range(MAX_SAMPLING_TRIES):
        point = Vec2(float(rng.uniform(0.0, CLUTTER_ARENA_SIDE)),
                     float(rng.uniform(0.0, CLUTTER_ARENA_SIDE)))
        nearest = nearest_obstacle_point(point, obstacles)
        if nearest is not None and nearest[1] < clearance:
            continue
        if any(point.distance(other) < min_separation for other in taken):
            continue
        return point
    raise ScenarioError(
        f"rejection sampling failed after {MAX_SAMPLING_TRIES} tries")


def gen_cluttered(
    rng: np.random.Generator,
    n_robots: int = 6,
    obstacle_radius: float = CLUTTER_OBSTACLE_RADIUS,
    params: Optional[WorldParams] = None,
) -> Scenario:
    """Random starts/goals in the fixed obstacle lattice.

    ``obstacle_radius=0.1`` reproduces the small-obstacle variant used to
    train the plain steering-PPO baseline.
    """
    params = params or WorldParams()
    obstacles = clutter_obstacles(obstacle_radius)
    clearance = SPAWN_CLEARANCE_FACTOR * params.r
    starts: list[Vec2] = []
    goals: list[Vec2] = []
    robots = []
    for _ in range(n_robots):
        start = _sample_clear_point(rng, obstacles, clearance, starts, 2.0 * params.r)
        starts.append(start)
    for k in range(n_robots):
        for _ in range(MAX_SAMPLING_TRIES):
            goal = _sample_clear_point(rng, obstacles, clearance, goals, 2.0 * params.r)
            if goal.distance(starts[k]) > 2.0 * params.r:
                break
        else:
            raise ScenarioError("could not place a goal away from its start")
        goals.append(goal)
        robots.append((starts[k], goal))
    name = f"clutter{n_robots}" + ("" if obstacle_radius == CLUTTER_OBSTACLE_RADIUS
                                   else f"-r{obstacle_radius:g}")
    return Scenario(name=name, robots=robots, obstacles=obstacles, params=params).validate()


def gen_circle_swap(
    n_robots: int,
    radius: float,
    rng: Optional[np.random.Generator] = None,
    params: Optional[WorldParams] = None,
    jitter: float = CIRCLE_SWAP_JITTER,
) -> Scenario:
    """Robots evenly spaced on a circle, each swapping with its antipode.

    With an rng, start angles get a small random jitter (the goals stay the
    exact antipodes of the jittered starts); without one the layout is
    perfectly regular.
    """
    if n_robots < 2:
        raise ScenarioError("circle swap needs at least 2 robots")
    params = params or WorldParams()
    robots = []
    for k in range(n_robots):
        angle = 2.0 * math.pi * k / n_robots
        if rng is not None:
            angle += float(rng.uniform(-jitter, jitter))
        start = Vec2(radius * math.cos(angle), radius * math.sin(angle))
        robots.append((start, -start))
    name = f"circle{n_robots}-r{radius:g}"
    return Scenario(name=name, robots=robots, obstacles=[], params=params).validate()


def _obstacle_to_json(obstacle: Obstacle) -> dict:
    if isinstance(obstacle, Circle):
        return {"type": "circle", "center": [obstacle.center.x, obstacle.center.y],
                "radius": obstacle.radius}
    return {"type": "rect", "min": [obstacle.lo.x, obstacle.lo.y],
            "max": [obstacle.hi.x, obstacle.hi.y]}


def _obstacle_from_json(doc: dict) -> Obstacle:
    if doc["type"] == "circle":
        return Circle(Vec2(*doc["center"]), doc["radius"])
    if doc["type"] == "rect":
        return Rect(Vec2(*doc["min"]), Vec2(*doc["max"]))
    raise ScenarioError(f"unknown obstacle type {doc['type']!r}")


def scenario_to_json(scenario: Scenario) -> dict:
    p = scenario.params
    return {
        "format": SCENARIO_FORMAT,
        "name": scenario.name,
        "params": {"r": p.r, "d_r": p.d_r, "rho": p.rho, "v": p.v, "dt": p.dt,
                   "d_m": p.d_m, "f_in_threshold": p.f_in_threshold},
        "robots": [{"start": [s.x, s.y], "goal": [g.x, g.y]}
                   for s, g in scenario.robots],
        "obstacles": [_obstacle_to_json(o) for o in scenario.obstacles],
    }


def scenario_from_json(doc: dict) -> Scenario:
    if doc.get("format") != SCENARIO_FORMAT:
        raise ScenarioError(f"unrecognized scenario format: {doc.get('format')!r}")
    params = WorldParams(**doc["params"])
    robots = [(Vec2(*entry["start"]), Vec2(*entry["goal"])) for entry in doc["robots"]]
    obstacles = [_obstacle_from_json(o) for o in doc["obstacles"]]
    return Scenario(name=doc["name"], robots=robots, obstacles=obstacles,
                    params=params).validate()


def save_scenario(path, scenario: Scenario) -> None:
    Path(path).write_text(json.dumps(scenario_to_json(scenario), indent=2) + "\n",
                          encoding="utf-8")


def load_scenario(path) -> Scenario:
    return scenario_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
