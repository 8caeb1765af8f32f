"""Planar geometry primitives shared by every other module.

Vectors, robot/obstacle/world value types, sensing queries (nearest obstacle
surface point, visible neighbors) and the collision predicates. Everything in
here is a plain value type or a pure function, so it is safe to share
read-only across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

EPS = 1e-12


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True, slots=True)
class Vec2:
    """2D vector; used for positions (m), velocities (m/s) and forces."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm_sq(self) -> float:
        return self.x * self.x + self.y * self.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def unit(self) -> "Vec2":
        """Unit vector; only defined for norm > 1e-12."""
        n = self.norm()
        if n <= EPS:
            raise ValueError(f"cannot normalize near-zero vector ({self.x}, {self.y})")
        return Vec2(self.x / n, self.y / n)

    def perp(self) -> "Vec2":
        """Counter-clockwise perpendicular (rotation by +90 degrees)."""
        return Vec2(-self.y, self.x)

    def rotate(self, theta: float) -> "Vec2":
        c, s = math.cos(theta), math.sin(theta)
        return Vec2(c * self.x - s * self.y, s * self.x + c * self.y)

    def angle(self) -> float:
        return math.atan2(self.y, self.x)

    def distance(self, other: "Vec2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


ZERO = Vec2(0.0, 0.0)


def heading_vec(heading: float) -> Vec2:
    return Vec2(math.cos(heading), math.sin(heading))


class Status(Enum):
    ACTIVE = "active"
    ARRIVED = "arrived"
    COLLIDED = "collided"


@dataclass
class RobotState:
    """Pose, goal and lifecycle status of one robot.

    ``trail`` starts at the spawn position and grows by one point per
    simulation step while the robot is active.
    """

    id: int
    position: Vec2
    heading: float
    goal: Vec2
    status: Status = Status.ACTIVE
    trail: list[Vec2] = field(default_factory=list)

    def __post_init__(self):
        if not self.trail:
            self.trail = [self.position]

    @property
    def start(self) -> Vec2:
        return self.trail[0]

    def goal_distance(self) -> float:
        return self.position.distance(self.goal)

    def start_goal_distance(self) -> float:
        return self.start.distance(self.goal)

    def heading_vec(self) -> Vec2:
        return heading_vec(self.heading)

    def path_length(self) -> float:
        return sum(a.distance(b) for a, b in zip(self.trail, self.trail[1:]))


@dataclass(frozen=True, slots=True)
class Circle:
    center: Vec2
    radius: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle whose four walls are the solid part.

    Used for bounded arenas: a robot inside the rectangle sees the nearest
    wall as its obstacle and repulsion pushes it back toward the interior.
    """

    lo: Vec2
    hi: Vec2

    def __post_init__(self):
        if not (self.lo.x < self.hi.x and self.lo.y < self.hi.y):
            raise ValueError(f"rect needs lo < hi componentwise, got {self.lo} / {self.hi}")


Obstacle = Union[Circle, Rect]


@dataclass
class WorldParams:
    """Sensing, kinematics and reward-range constants shared by all robots."""

    r: float = 0.1              # safe radius (m)
    d_r: float = 6.0            # detection range (m)
    rho: float = 10.0           # obstacle influence range (m)
    v: float = 0.5              # cruise speed (m/s)
    dt: float = 0.1             # integration step (s)
    d_m: float = 10.0           # dense-reward range (m)
    f_in_threshold: float = 1.0  # wall-following trigger on |F_in|

    def validate(self) -> "WorldParams":
        if not 0.0 < self.r < self.d_r:
            raise ValueError(f"need 0 < r < d_r, got r={self.r}, d_r={self.d_r}")
        if self.rho <= 0.0 or self.v <= 0.0 or self.dt <= 0.0 or self.d_m <= 0.0:
            raise ValueError("rho, v, dt and d_m must be positive")
        return self


@dataclass
class World:
    """Obstacle set, robot roster and parameters for one simulation run."""

    params: WorldParams
    robots: list[RobotState]
    obstacles: list[Obstacle]
    seed: int = 0
    t: int = 0


def _circle_surface(position: Vec2, circle: Circle) -> tuple[Vec2, float]:
    offset = position - circle.center
    d_center = offset.norm()
    if d_center <= EPS:
        # Degenerate: robot exactly at the center. Pick a fixed direction so
        # the result stays deterministic; distance is maximally negative.
        return circle.center + Vec2(circle.radius, 0.0), -circle.radius
    direction = Vec2(offset.x / d_center, offset.y / d_center)
    surface = circle.center + direction * circle.radius
    return surface, d_center - circle.radius


def _rect_surface(position: Vec2, rect: Rect) -> tuple[Vec2, float]:
    """Nearest point on the rectangle's boundary (the walls)."""
    inside = rect.lo.x <= position.x <= rect.hi.x and rect.lo.y <= position.y <= rect.hi.y
    if not inside:
        cx = min(max(position.x, rect.lo.x), rect.hi.x)
        cy = min(max(position.y, rect.lo.y), rect.hi.y)
        surface = Vec2(cx, cy)
        return surface, position.distance(surface)
    # Inside: project onto the closest of the four walls.
    gaps = (
        (position.x - rect.lo.x, Vec2(rect.lo.x, position.y)),
        (rect.hi.x - position.x, Vec2(rect.hi.x, position.y)),
        (position.y - rect.lo.y, Vec2(position.x, rect.lo.y)),
        (rect.hi.y - position.y, Vec2(position.x, rect.hi.y)),
    )
    dist, surface = min(gaps, key=lambda g: g[0])
    return surface, dist


def obstacle_surface(position: Vec2, obstacle: Obstacle) -> tuple[Vec2, float]:
    """Closest surface point and signed distance for a single obstacle.

    A negative distance reports penetration (point inside a circle). Rect
    obstacles are wall sets, so their distance is never negative.
    """
    if isinstance(obstacle, Circle):
        return _circle_surface(position, obstacle)
    return _rect_surface(position, obstacle)


def nearest_obstacle_point(
    position: Vec2,
    obstacles: list[Obstacle],
    detection_range: Optional[float] = None,
) -> Optional[tuple[Vec2, float]]:
    """Closest point on any obstacle surface, with its Euclidean distance.

    Returns None when there are no obstacles, or when every surface is
    farther than ``detection_range``. Penetration shows up as a non-positive
    distance; the caller decides whether that is a collision.
    """
    best: Optional[tuple[Vec2, float]] = None
    for obstacle in obstacles:
        surface, dist = obstacle_surface(position, obstacle)
        if best is None or dist < best[1]:
            best = (surface, dist)
    if best is None:
        return None
    if detection_range is not None and best[1] > detection_range:
        return None
    return best


def visible_neighbors(i: int, robots: list[RobotState], d_r: float) -> list[int]:
    """Indices of robots within detection range of robot i, nearest first."""
    me = robots[i].position
    seen = []
    for j, other in enumerate(robots):
        if j == i:
            continue
        d = me.distance(other.position)
        if d < d_r:
            seen.append((d, j))
    seen.sort()
    return [j for _, j in seen]


@dataclass(frozen=True, slots=True)
class CollisionEvent:
    """One collision this step: robot-obstacle (j is None) or robot-robot."""

    kind: str  # "obstacle" | "robot"
    i: int
    j: Optional[int] = None

    def involves(self, robot_id: int) -> bool:
        return self.i == robot_id or self.j == robot_id


def collision_check(
    robots: list[RobotState],
    obstacles: list[Obstacle],
    r: float,
) -> list[CollisionEvent]:
    """All collision events at the current poses.

    Robot-obstacle when the surface distance is < r, robot-robot when the
    center distance is < 2r; each unordered robot pair is reported once.
    Status filtering is left to the caller.
    """
    events: list[CollisionEvent] = []
    for i, robot in enumerate(robots):
        nearest = nearest_obstacle_point(robot.position, obstacles)
        if nearest is not None and nearest[1] < r:
            events.append(CollisionEvent("obstacle", i))
    for i in range(len(robots)):
        for j in range(i + 1, len(robots)):
            if robots[i].position.distance(robots[j].position) < 2.0 * r:
                events.append(CollisionEvent("robot", i, j))
    return events
