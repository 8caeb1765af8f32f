"""World stepping under first-order kinematics with heading-only control.

Each step every active robot senses the pre-step snapshot, obtains its field
parameters (from the shared policy, or fixed for the plain-field baseline),
superposes the forces, applies the wall-following override, and moves
exactly v*dt along the resulting unit direction. Collisions, arrivals and
rewards are resolved after all robots have moved. The whole pipeline is
deterministic given (seed, config, checkpoint).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import observation as obs_mod
from . import policy as policy_mod
from .forces import ApfParams, ForceBreakdown, PenetrationError, attractive_force, inter_robot_force, repulsive_force, resultant
from .geometry import (
    CollisionEvent,
    Status,
    Vec2,
    World,
    WorldParams,
    collision_check,
    heading_vec,
    nearest_obstacle_point,
    visible_neighbors,
)
from .ppo import Transition
from .rewards import RewardBreakdown, goal_reward, step_reward
from .scenarios import Scenario
from .wall_following import plan_direction, tangent_pair

TRAJECTORY_FORMAT = "rpfnav-trajectory-v1"
TRAJECTORY_COLUMNS = ("step", "robot_id", "x", "y", "heading", "eta", "lambda",
                      "reward_total", "event_flags")


class Mode(Enum):
    RPF = "rpf"
    VANILLA_APF = "vanilla_apf"
    VANILLA_PPO = "vanilla_ppo"


@dataclass
class SimConfig:
    params: WorldParams = field(default_factory=WorldParams)
    mode: Mode = Mode.RPF
    seed: int = 0
    max_steps: int = 1000
    apf: ApfParams = field(default_factory=lambda: ApfParams(0.05, 2.0))
    wall_following: Optional[bool] = None  # None: on for RPF, off for the baseline
    stochastic: bool = False               # sample actions instead of using the mean

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        self.params.validate()

    def wall_following_enabled(self) -> bool:
        if self.wall_following is not None:
            return self.wall_following
        return self.mode is Mode.RPF


@dataclass
class StepRecord:
    step: int
    robot_id: int
    position: Vec2
    heading: float
    action: Optional[tuple]              # (eta, lambda), (a_t,) or None
    forces: Optional[ForceBreakdown]
    reward: Optional[RewardBreakdown]
    events: list[CollisionEvent]
    status: Status


def vanilla_ppo_direction(v_current: Vec2, a_t: float) -> Vec2:
    """Steering baseline: normalize(v + a_t * perp(v))."""
    steered = v_current + v_current.perp() * a_t
    return steered.unit()


def step(
    world: World,
    config: SimConfig,
    policy: Optional[policy_mod.PolicyBundle] = None,
    rng: Optional[np.random.Generator] = None,
    collect: bool = False,
    t_offset: int = 0,
) -> tuple[list[StepRecord], list[Transition]]:
    """Advance the world by one synchronous step.

    All decisions read the same pre-step snapshot; integration, collision
    resolution, status updates and rewards happen afterwards. Returns the
    per-robot records and, when ``collect`` is set, the PPO transitions for
    robots that acted through the policy.
    """
    params = world.params
    records: list[StepRecord] = []
    transitions: list[Transition] = []

    active = [r for r in world.robots if r.status is Status.ACTIVE]

    # Robots already inside the arrival radius do not act this step.
    movers = []
    for robot in active:
        if robot.goal_distance() < params.r:
            robot.status = Status.ARRIVED
            bonus = goal_reward(robot.path_length(), robot.start_goal_distance(), True)
            records.append(StepRecord(
                step=world.t, robot_id=robot.id, position=robot.position,
                heading=robot.heading, action=None, forces=None,
                reward=RewardBreakdown(bonus, 0.0, 0.0, 0.0, 0.0),
                events=[], status=Status.ARRIVED))
        else:
            movers.append(robot)

    if not movers:
        world.t += 1
        return records, transitions

    index_of = {id(r): i for i, r in enumerate(world.robots)}
    needs_policy = config.mode in (Mode.RPF, Mode.VANILLA_PPO)
    if needs_policy and policy is None:
        raise ValueError(f"mode {config.mode.value} requires a policy")

    # Sense (and embed, if a policy decides) from the common snapshot.
    sensed = []
    for robot in movers:
        i = index_of[id(robot)]
        local, neighbor_blocks = obs_mod.build_observation(
            i, world.robots, world.obstacles, params)
        sensed.append((robot, i, local, neighbor_blocks))

    samples = None
    obs_matrix = None
    local_feats = neighbor_feats = None
    if needs_policy:
        local_feats = [obs_mod.local_features(local, params) for _, _, local, _ in sensed]
        neighbor_feats = [obs_mod.neighbor_features(blocks, params)
                          for _, _, _, blocks in sensed]
        obs_matrix, _ = obs_mod.embed_batch_cached(local_feats, neighbor_feats,
                                                   policy.encoder)
        if config.stochastic:
            if rng is None:
                raise ValueError("stochastic stepping requires an rng")
            samples = policy_mod.sample_action(policy, obs_matrix, rng)
        else:
            actions = policy_mod.deterministic_action(policy, obs_matrix)
            samples = policy_mod.ActionSample(
                action=actions,
                log_prob=np.zeros(len(movers)),
                value=policy_mod.value_of(policy, obs_matrix),
                pre_squash=np.zeros_like(actions))

    # Decide directions against the snapshot, then integrate all at once.
    moves = []
    for k, (robot, i, local, neighbor_blocks) in enumerate(sensed):
        pos = robot.position
        action_tuple: Optional[tuple] = None
        breakdown: Optional[ForceBreakdown] = None

        if config.mode is Mode.VANILLA_PPO:
            a_t = float(samples.action[k][0])
            action_tuple = (a_t,)
            direction = vanilla_ppo_direction(robot.heading_vec() * params.v, a_t)
        else:
            if config.mode is Mode.RPF:
                eta, lam = (float(samples.action[k][0]), float(samples.action[k][1]))
            else:
                eta, lam = config.apf.eta, config.apf.lam
            action_tuple = (eta, lam)

            nearest = nearest_obstacle_point(pos, world.obstacles, params.d_r)
            f_a = attractive_force(pos, robot.goal)
            try:
                f_r = repulsive_force(pos, nearest, eta, params.rho)
            except PenetrationError:
                robot.status = Status.COLLIDED
                records.append(StepRecord(
                    step=world.t, robot_id=robot.id, position=pos,
                    heading=robot.heading, action=action_tuple, forces=None,
                    reward=None, events=[CollisionEvent("obstacle", i)],
                    status=Status.COLLIDED))
                continue
            f_in = inter_robot_force(i, world.robots, visible_neighbors(
                i, world.robots, params.d_r), lam)
            breakdown = resultant(f_a, f_r, f_in)
            tangents = None
            if config.wall_following_enabled() and nearest is not None:
                tangents = tangent_pair(pos, nearest[0])
            direction = plan_direction(breakdown, tangents, robot.heading_vec(),
                                       params.f_in_threshold)

        moves.append((robot, i, k, robot.heading, direction, action_tuple, breakdown))

    step_len = params.v * params.dt
    for robot, _, _, _, direction, _, _ in moves:
        robot.position = robot.position + direction * step_len
        robot.heading = direction.angle()
        robot.trail.append(robot.position)

    events = collision_check(world.robots, world.obstacles, params.r)

    for robot, i, k, prev_heading, direction, action_tuple, breakdown in moves:
        my_events = [e for e in events if e.involves(i)]
        collided = bool(my_events)
        reached = False
        if collided:
            robot.status = Status.COLLIDED
        elif robot.goal_distance() < params.r:
            robot.status = Status.ARRIVED
            reached = True

        nearest_after = nearest_obstacle_point(robot.position, world.obstacles,
                                               params.d_r)
        reward = step_reward(
            d_a=robot.path_length(),
            d_s=robot.start_goal_distance(),
            reached=reached,
            prev_heading=prev_heading,
            new_heading=robot.heading,
            events=my_events,
            d_o=nearest_after[1] if nearest_after is not None else None,
            d_g=robot.goal_distance(),
            r=params.r,
            d_m=params.d_m,
        )
        records.append(StepRecord(
            step=world.t, robot_id=robot.id, position=robot.position,
            heading=robot.heading, action=action_tuple, forces=breakdown,
            reward=reward, events=my_events, status=robot.status))

        if collect and needs_policy:
            transitions.append(Transition(
                robot_id=robot.id,
                t=t_offset + world.t,
                embedded_obs=obs_matrix[k],
                local_feats=local_feats[k],
                neighbor_feats=neighbor_feats[k],
                action=np.array(samples.action[k], dtype=np.float64, copy=True),
                pre_squash=np.array(samples.pre_squash[k], dtype=np.float64, copy=True),
                log_prob=float(samples.log_prob[k]),
                value=float(samples.value[k]),
                reward=reward.total,
                done=robot.status is not Status.ACTIVE,
            ))

    world.t += 1
    return records, transitions


@dataclass
class EpisodeSummary:
    steps: int
    trails: list[list[Vec2]]
    returns: list[float]
    arrived: list[bool]
    collided: list[bool]
    events: list[tuple[int, CollisionEvent]]
    records: list[StepRecord]


def run_episode(
    config: SimConfig,
    scenario: Scenario,
    policy: Optional[policy_mod.PolicyBundle] = None,
) -> EpisodeSummary:
    """Roll one episode to completion (all robots done or max_steps)."""
    world = scenario.build_world(config.seed)
    rng = np.random.default_rng(config.seed)
    all_records: list[StepRecord] = []
    all_events: list[tuple[int, CollisionEvent]] = []
    for _ in range(config.max_steps):
        if not any(r.status is Status.ACTIVE for r in world.robots):
            break
        records, _ = step(world, config, policy, rng)
        all_records.extend(records)
        for rec in records:
            for event in rec.events:
                all_events.append((rec.step, event))
    returns = [0.0] * len(world.robots)
    for rec in all_records:
        if rec.reward is not None:
            returns[rec.robot_id] += rec.reward.total
    return EpisodeSummary(
        steps=world.t,
        trails=[r.trail for r in world.robots],
        returns=returns,
        arrived=[r.status is Status.ARRIVED for r in world.robots],
        collided=[r.status is Status.COLLIDED for r in world.robots],
        events=all_events,
        records=all_records,
    )


def _flags(record: StepRecord) -> str:
    flags = ""
    if any(e.kind == "obstacle" for e in record.events):
        flags += "O"
    if any(e.kind == "robot" for e in record.events):
        flags += "R"
    if record.status is Status.ARRIVED:
        flags += "A"
    if record.status is Status.COLLIDED:
        flags += "C"
    return flags or "-"


def write_trajectory(path, records: list[StepRecord]) -> None:
    """Line-delimited export, one record per robot per step.

    Columns (space separated): step robot_id x y heading eta lambda
    reward_total event_flags. Floats use shortest round-trip repr; missing
    values are written as nan. UTF-8 with LF line endings.
    """
    lines = [f"# {TRAJECTORY_FORMAT} columns: " + " ".join(TRAJECTORY_COLUMNS)]
    for rec in records:
        if rec.action is not None and len(rec.action) == 2:
            eta, lam = rec.action
        else:
            eta, lam = math.nan, math.nan
        reward_total = rec.reward.total if rec.reward is not None else math.nan
        lines.append(" ".join([
            str(rec.step), str(rec.robot_id),
            repr(rec.position.x), repr(rec.position.y), repr(rec.heading),
            repr(float(eta)), repr(float(lam)), repr(float(reward_total)),
            _flags(rec),
        ]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


@dataclass(frozen=True)
class TrajectoryRow:
    step: int
    robot_id: int
    x: float
    y: float
    heading: float
    eta: float
    lam: float
    reward_total: float
    event_flags: str


def read_trajectory(path) -> list[TrajectoryRow]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != len(TRAJECTORY_COLUMNS):
            raise ValueError(f"malformed trajectory line: {line!r}")
        rows.append(TrajectoryRow(
            step=int(parts[0]), robot_id=int(parts[1]), x=float(parts[2]),
            y=float(parts[3]), heading=float(parts[4]), eta=float(parts[5]),
            lam=float(parts[6]), reward_total=float(parts[7]), event_flags=parts[8]))
    if not rows:
        raise ValueError(f"no records in trajectory file {path}")
    return rows
