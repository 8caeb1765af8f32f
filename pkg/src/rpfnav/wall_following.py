"""Hard and soft wall-following rules that override the raw force resultant.

Near an obstacle the plain superposition can cancel out or point backwards;
the external neighborhood splits into sub-area A (attract+repulse opposes
the attraction: follow an obstacle tangent) and sub-area B (repulsion
opposes attraction: blend the tangent into the resultant so the turn stays
smooth). Everywhere else the raw resultant direction is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .forces import ForceBreakdown
from .geometry import EPS, Vec2


class SubArea(Enum):
    FREE = "free"
    A = "a"
    B = "b"


@dataclass(frozen=True, slots=True)
class TangentPair:
    """The two unit tangents, perpendicular to the robot-to-surface ray."""

    n1: Vec2
    n2: Vec2


def classify_subarea(f_a: Vec2, f_r: Vec2, f_ar: Vec2) -> SubArea:
    """A if f_ar opposes f_a, else B if f_r opposes f_a, else free."""
    if f_ar.dot(f_a) < 0.0:
        return SubArea.A
    if f_r.dot(f_a) < 0.0:
        return SubArea.B
    return SubArea.FREE


def tangent_pair(position: Vec2, surface_point: Vec2) -> TangentPair:
    """Unit tangents at the nearest surface point, n2 = -n1."""
    ray = position - surface_point
    if ray.norm() <= EPS:
        raise ValueError("robot coincides with the obstacle surface point")
    n1 = ray.unit().perp()
    return TangentPair(n1=n1, n2=-n1)


def select_tangent(pair: TangentPair, heading: Vec2, f_in: Vec2, threshold: float) -> Vec2:
    """Pick the tangent with the smaller angle to the steering reference.

    The reference is f_in when its magnitude exceeds the threshold (give way
    to the crowd) and the current motion direction otherwise. Since
    n2 = -n1, the smaller angle test reduces to the sign of one dot product;
    an exact tie deterministically picks n1.
    """
    if heading.norm() <= EPS:
        raise ValueError("heading must be nonzero")
    reference = f_in if f_in.norm() > threshold else heading
    return pair.n1 if pair.n1.dot(reference) >= 0.0 else pair.n2


def soft_force(f_ar: Vec2, f_r: Vec2, n_sel: Vec2) -> Vec2:
    """Blend the resultant toward the tangent, weighted by repulsion size.

    Returns unit((f_ar + 2*|f_r|*n_sel)); equal to unit(f_ar) on entry to
    sub-area B (|f_r| small relative to f_ar is not required, only that the
    blend is continuous there) and approaching n_sel as |f_r| grows. A
    vanishing blend falls back to the tangent itself.
    """
    blended = f_ar + n_sel * (2.0 * f_r.norm())
    if blended.norm() <= EPS:
        return n_sel
    return blended.unit()


def plan_direction(
    breakdown: ForceBreakdown,
    tangents: Optional[TangentPair],
    heading: Vec2,
    threshold: float,
) -> Vec2:
    """Final unit motion direction after the wall-following override.

    Sub-area A follows the selected tangent outright, sub-area B uses the
    soft blend, free space normalizes the full resultant. Without a sensed
    obstacle there is no tangent pair and the resultant always wins. A
    vanishing free-space resultant (an exact local minimum) keeps the
    current heading so the output stays a unit vector.
    """
    area = classify_subarea(breakdown.f_a, breakdown.f_r, breakdown.f_ar)
    if tangents is not None and area is not SubArea.FREE:
        selected = select_tangent(tangents, heading, breakdown.f_in, threshold)
        if area is SubArea.A:
            return selected
        return soft_force(breakdown.f_ar, breakdown.f_r, selected)
    if breakdown.f_total.norm() <= EPS:
        return heading.unit()
    return breakdown.f_total.unit()
