"""Trajectory quality metrics: traveling distance and motion smoothness.

Both consume trails (position sequences). The distance metric is plain path
length; the smoothness metric averages the per-step relative velocity
change, so constant-heading motion scores 0 and larger values mean more
oscillatory trajectories. Both are invariant under rigid motions of the
world and independent of the step size.
"""

from __future__ import annotations

from .geometry import Vec2


def traveling_distance(trails: list[list[Vec2]]) -> tuple[list[float], float]:
    """Per-robot path length (sum of step displacements) and roster mean."""
    if not trails:
        raise ValueError("need at least one trail")
    lengths = [sum(a.distance(b) for a, b in zip(trail, trail[1:])) for trail in trails]
    return lengths, sum(lengths) / len(lengths)


def motion_smoothness(trails: list[list[Vec2]]) -> tuple[list[float], float]:
    """Mean relative velocity change per step, per robot plus roster mean.

    For a trail with T motion steps this is
    sum_t |v_t - v_{t-1}| / |v_t| divided by T; the step duration cancels,
    so displacements stand in for velocities. Trails with fewer than two
    motion steps score 0.
    """
    if not trails:
        raise ValueError("need at least one trail")
    scores = []
    for trail in trails:
        deltas = [b - a for a, b in zip(trail, trail[1:])]
        steps = len(deltas)
        if steps < 2:
            scores.append(0.0)
            continue
        total = 0.0
        for prev, cur in zip(deltas, deltas[1:]):
            total += (cur - prev).norm() / cur.norm()
        scores.append(total / steps)
    return scores, sum(scores) / len(scores)
