"""Per-robot, per-step reward components.

Five additive terms: a one-shot arrival bonus discounting detours, a sharp-
turn penalty, flat robot-robot collision punishment, a piecewise obstacle
proximity penalty, and a dense progress term near the goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .geometry import CollisionEvent, wrap_angle

ARRIVAL_BASE = 300.0
ARRIVAL_DETOUR_SLOPE = 100.0
TURN_PENALTY = -5.0
TURN_THRESHOLD = math.radians(45.0)
ROBOT_HIT_PENALTY = -100.0
OBSTACLE_HIT_PENALTY = -100.0
OBSTACLE_NEAR_PENALTY = -20.0


@dataclass(frozen=True, slots=True)
class RewardBreakdown:
    r_m: float
    r_s: float
    r_c: float
    r_o: float
    r_p: float

    @property
    def total(self) -> float:
        return self.r_m + self.r_s + self.r_c + self.r_o + self.r_p


def goal_reward(d_a: float, d_s: float, reached: bool) -> float:
    """300 - 100 * (path length / straight-line distance), on arrival only."""
    if not reached:
        return 0.0
    ratio = d_a / d_s if d_s > 0.0 else 0.0
    return ARRIVAL_BASE - ARRIVAL_DETOUR_SLOPE * ratio


def smoothness_penalty(prev_heading: float, new_heading: float) -> float:
    """-5 when the wrapped heading change exceeds 45 degrees."""
    if abs(wrap_angle(new_heading - prev_heading)) > TURN_THRESHOLD:
        return TURN_PENALTY
    return 0.0


def robot_collision_penalty(events: list[CollisionEvent]) -> float:
    """-100 if any robot-robot collision event hit this robot this step."""
    if any(event.kind == "robot" for event in events):
        return ROBOT_HIT_PENALTY
    return 0.0


def obstacle_proximity_penalty(d_o: Optional[float], r: float) -> float:
    """-100 inside the safe radius, -20 within twice of it, else 0."""
    if d_o is None:
        return 0.0
    if d_o < r:
        return OBSTACLE_HIT_PENALTY
    if d_o < 2.0 * r:
        return OBSTACLE_NEAR_PENALTY
    return 0.0


def progress_reward(d_g: float, d_m: float) -> float:
    """Dense pull toward the goal: 1 - d_g/d_m inside the d_m band."""
    if d_g < d_m:
        return 1.0 - d_g / d_m
    return 0.0


def step_reward(
    *,
    d_a: float,
    d_s: float,
    reached: bool,
    prev_heading: float,
    new_heading: float,
    events: list[CollisionEvent],
    d_o: Optional[float],
    d_g: float,
    r: float,
    d_m: float,
) -> RewardBreakdown:
    """Assemble all five components for one robot after one step."""
    return RewardBreakdown(
        r_m=goal_reward(d_a, d_s, reached),
        r_s=smoothness_penalty(prev_heading, new_heading),
        r_c=robot_collision_penalty(events),
        r_o=obstacle_proximity_penalty(d_o, r),
        r_p=progress_reward(d_g, d_m),
    )
