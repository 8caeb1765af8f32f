"""Artificial potential field force laws.

The attractive force is a unit vector toward the goal; repulsion comes from
the single nearest obstacle surface point; the inter-robot term sums a
signed coefficient over visible neighbors, repelling when close and gently
cohering when far. All three are dimensionless direction generators: the
simulator multiplies the final unit direction by the cruise speed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import EPS, ZERO, RobotState, Vec2

RL_ETA_MAX = 0.1
RL_LAMBDA_MAX = 5.0


class PenetrationError(ValueError):
    """Raised when a force is requested for a robot inside an obstacle."""


@dataclass(frozen=True, slots=True)
class ApfParams:
    """Scale (eta) and compactness (lam) of the potential field.

    The RL action box restricts eta to [0, 0.1] and lam to [0, 5]; the fixed
    baseline may use any non-negative values.
    """

    eta: float
    lam: float

    def __post_init__(self):
        if self.eta < 0.0 or self.lam < 0.0:
            raise ValueError(f"eta and lam must be >= 0, got ({self.eta}, {self.lam})")


@dataclass(frozen=True, slots=True)
class ForceBreakdown:
    f_a: Vec2
    f_r: Vec2
    f_in: Vec2
    f_ar: Vec2
    f_total: Vec2


def attractive_force(position: Vec2, goal: Vec2) -> Vec2:
    """Unit pull toward the goal; zero when already on top of it."""
    offset = goal - position
    d = offset.norm()
    if d <= EPS:
        return ZERO
    return Vec2(offset.x / d, offset.y / d)


def repulsive_force(
    position: Vec2,
    nearest: tuple[Vec2, float] | None,
    eta: float,
    rho: float,
) -> Vec2:
    """Push away from the nearest obstacle surface point.

    Magnitude eta * (1/d - 1/rho) / d^2 inside the influence range rho, zero
    beyond it. ``nearest`` is the (surface_point, distance) pair from
    ``nearest_obstacle_point``; None means nothing sensed.
    """
    if nearest is None:
        return ZERO
    surface, d = nearest
    if d <= 0.0:
        raise PenetrationError(f"robot penetrates obstacle (distance {d})")
    if d > rho or eta == 0.0:
        return ZERO
    magnitude = eta * (1.0 / d - 1.0 / rho) / (d * d)
    direction = (position - surface).unit()
    return direction * magnitude


def inter_robot_force(
    i: int,
    robots: list[RobotState],
    neighbors: list[int],
    lam: float,
) -> Vec2:
    """Sum of (0.5 - lam/d) * unit(p_j - p_i) over visible neighbors.

    Repels when d < 2*lam and coheres beyond; an empty neighbor set yields
    zero. Coincident robots are a modelling error and raise.
    """
    me = robots[i].position
    fx = fy = 0.0
    for j in neighbors:
        offset = robots[j].position - me
        d = offset.norm()
        if d <= EPS:
            raise PenetrationError(f"robots {i} and {j} are coincident")
        coeff = (0.5 - lam / d) / d
        fx += coeff * offset.x
        fy += coeff * offset.y
    return Vec2(fx, fy)


def resultant(f_a: Vec2, f_r: Vec2, f_in: Vec2) -> ForceBreakdown:
    """Superpose the three forces, exposing f_ar for wall following."""
    f_ar = f_a + f_r
    return ForceBreakdown(f_a=f_a, f_r=f_r, f_in=f_in, f_ar=f_ar, f_total=f_ar + f_in)
