"""Episode loop wiring the simulator to the PPO updater.

Per episode: draw a fresh training scenario, roll the world with stochastic
actions, pool every robot's transitions into the shared buffer, and update
the policy each time the step counter crosses the update interval. The
learning rate decays exponentially with the episode index. The loop itself
does no file IO; callers observe progress through a callback.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import observation as obs_mod
from . import policy as policy_mod
from .geometry import Status, WorldParams
from .ppo import PpoConfig, RolloutBuffer, lr_schedule, ppo_update
from .scenarios import Scenario, gen_circle_swap, gen_cluttered
from .simulator import Mode, SimConfig, step

SCENARIO_KINDS = ("circle", "clutter", "both")


class TrainingAborted(RuntimeError):
    """Raised when an update sees a non-finite loss; parameters are kept."""


@dataclass
class TrainConfig:
    ppo: PpoConfig = field(default_factory=PpoConfig)
    world: WorldParams = field(default_factory=WorldParams)
    mode: Mode = Mode.RPF
    scenario_kind: str = "circle"
    n_robots: int = 6
    circle_radius: float = 2.0
    obstacle_radius: float = 0.5
    seed: int = 0
    episodes: Optional[int] = None  # default: ppo.episodes

    def validate(self) -> "TrainConfig":
        self.ppo.validate()
        self.world.validate()
        if self.scenario_kind not in SCENARIO_KINDS:
            raise ValueError(f"scenario_kind must be one of {SCENARIO_KINDS}")
        if self.mode is Mode.VANILLA_APF:
            raise ValueError("the fixed-parameter baseline is not trainable")
        if self.n_robots < 1:
            raise ValueError("need at least one robot")
        return self

    @property
    def n_episodes(self) -> int:
        return self.episodes if self.episodes is not None else self.ppo.episodes


@dataclass
class EpisodeStats:
    episode: int
    steps: int
    return_mean: float
    return_min: float
    return_max: float
    arrivals: int
    collisions: int
    lr: float
    n_updates: int
    policy_loss: float
    value_loss: float
    entropy: float

    def to_json(self) -> dict:
        return {
            "episode": self.episode, "steps": self.steps,
            "return_mean": self.return_mean, "return_min": self.return_min,
            "return_max": self.return_max, "arrivals": self.arrivals,
            "collisions": self.collisions, "lr": self.lr,
            "n_updates": self.n_updates, "policy_loss": self.policy_loss,
            "value_loss": self.value_loss, "entropy": self.entropy,
        }


class Trainer:
    """Owns the shared policy, rollout buffer and all training randomness."""

    def __init__(self, config: TrainConfig,
                 policy: Optional[policy_mod.PolicyBundle] = None):
        self.config = config.validate()
        master = np.random.default_rng(config.seed)
        self._net_rng = np.random.default_rng(master.integers(2**63))
        self._scenario_rng = np.random.default_rng(master.integers(2**63))
        self._action_rng = np.random.default_rng(master.integers(2**63))
        if policy is None:
            box = (policy_mod.rpf_box() if config.mode is Mode.RPF
                   else policy_mod.steering_box())
            policy = policy_mod.build_policy(box, self._net_rng)
        self.policy = policy
        self.buffer = RolloutBuffer()
        self.global_t = 0
        self.history: list[EpisodeStats] = []

    def make_scenario(self, episode: int) -> Scenario:
        kind = self.config.scenario_kind
        if kind == "both":
            kind = "clutter" if episode % 2 == 0 else "circle"
        if kind == "circle":
            return gen_circle_swap(self.config.n_robots, self.config.circle_radius,
                                   rng=self._scenario_rng, params=self.config.world)
        return gen_cluttered(self._scenario_rng, self.config.n_robots,
                             self.config.obstacle_radius, params=self.config.world)

    def _bootstrap_values(self, world) -> dict[int, float]:
        """Critic values for robots whose streams are still open."""
        open_ids = set(self.buffer.robot_ids())
        values: dict[int, float] = {}
        pending = [(i, r) for i, r in enumerate(world.robots)
                   if r.status is Status.ACTIVE and r.id in open_ids]
        if not pending:
            return values
        local_feats, neighbor_feats = [], []
        for i, robot in pending:
            local, blocks = obs_mod.build_observation(i, world.robots,
                                                      world.obstacles, world.params)
            local_feats.append(obs_mod.local_features(local, world.params))
            neighbor_feats.append(obs_mod.neighbor_features(blocks, world.params))
        obs, _ = obs_mod.embed_batch_cached(local_feats, neighbor_feats,
                                            self.policy.encoder)
        vals = policy_mod.value_of(self.policy, obs)
        for (_, robot), value in zip(pending, np.atleast_1d(vals)):
            values[robot.id] = float(value)
        return values

    def train_episode(self, episode: int) -> EpisodeStats:
        cfg = self.config
        lr = lr_schedule(cfg.ppo.alpha0, cfg.ppo.beta, episode)
        scenario = self.make_scenario(episode)
        world = scenario.build_world(seed=cfg.seed)
        sim_config = SimConfig(params=scenario.params, mode=cfg.mode,
                               seed=cfg.seed, max_steps=cfg.ppo.steps_per_episode,
                               stochastic=True)
        returns = [0.0] * len(world.robots)
        n_updates = 0
        last_update = None
        episode_start = self.global_t

        for t in range(1, cfg.ppo.steps_per_episode + 1):
            records, transitions = step(world, sim_config, self.policy,
                                        self._action_rng, collect=True,
                                        t_offset=episode_start)
            for tr in transitions:
                self.buffer.add(tr)
            for rec in records:
                if rec.reward is not None:
                    returns[rec.robot_id] += rec.reward.total
            self.global_t += 1
            if t % cfg.ppo.update_interval == 0 and len(self.buffer) > 0:
                stats = ppo_update(self.policy, self.buffer, cfg.ppo, lr,
                                   self._bootstrap_values(world))
                n_updates += 1
                last_update = stats
                if stats.aborted:
                    raise TrainingAborted(
                        f"non-finite loss in episode {episode} at step {t}")
            if not any(r.status is Status.ACTIVE for r in world.robots):
                break
        self.buffer.mark_episode_end()

        return EpisodeStats(
            episode=episode,
            steps=world.t,
            return_mean=float(np.mean(returns)),
            return_min=float(np.min(returns)),
            return_max=float(np.max(returns)),
            arrivals=sum(r.status is Status.ARRIVED for r in world.robots),
            collisions=sum(r.status is Status.COLLIDED for r in world.robots),
            lr=lr,
            n_updates=n_updates,
            policy_loss=last_update.policy_loss if last_update else 0.0,
            value_loss=last_update.value_loss if last_update else 0.0,
            entropy=last_update.entropy if last_update else 0.0,
        )

    def run(self, on_episode: Optional[Callable[[EpisodeStats], None]] = None
            ) -> list[EpisodeStats]:
        for episode in range(self.config.n_episodes):
            stats = self.train_episode(episode)
            self.history.append(stats)
            if on_episode is not None:
                on_episode(stats)
        return self.history
