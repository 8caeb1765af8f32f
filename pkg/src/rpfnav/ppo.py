"""Shared-policy PPO over pooled multi-robot transitions.

All robots act through one parameter set, and their transitions land in one
rollout buffer, grouped per robot so advantage recursion never crosses
streams. Updates fire on the step cadence, run K epochs of the clipped
surrogate plus value and entropy terms over the whole batch, and clear the
buffer. Gradients are assembled by hand from the network caches; the
encoder receives contributions from both heads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import neural, observation, policy as policy_mod
from .policy import PolicyBundle


@dataclass
class PpoConfig:
    """Training hyperparameters; defaults follow the experiment setup."""

    alpha0: float = 3e-4        # initial learning rate
    beta: float = 0.999         # per-episode lr decay factor
    gamma: float = 0.999        # discount
    epsilon: float = 0.2        # surrogate clip width
    tau: float = 0.9            # advantage-estimation decay (GAE lambda)
    c1: float = 0.5             # value-loss coefficient
    c2: float = 0.001           # entropy coefficient
    update_interval: int = 100  # environment steps between updates (Z)
    epochs: int = 1             # passes over the buffer per update (K)
    value_extra_epochs: int = 4  # critic-only fitting passes after each update
    mean_reg: float = 0.01      # L2 pull on the pre-squash action mean
    steps_per_episode: int = 1000
    episodes: int = 1000

    def validate(self) -> "PpoConfig":
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must be in (0,1), got {self.epsilon}")
        for name in ("beta", "gamma", "tau"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ValueError(f"{name} must be in (0,1), got {value}")
        if min(self.alpha0, self.c1, self.c2) <= 0.0:
            raise ValueError("alpha0, c1 and c2 must be positive")
        if min(self.update_interval, self.epochs, self.steps_per_episode, self.episodes) < 1:
            raise ValueError("counts must be >= 1")
        if self.value_extra_epochs < 0:
            raise ValueError("value_extra_epochs must be >= 0")
        if self.mean_reg < 0:
            raise ValueError("mean_reg must be >= 0")
        return self


def lr_schedule(alpha0: float, beta: float, episode: int) -> float:
    """Exponentially decayed learning rate alpha0 * beta**episode."""
    if episode < 0:
        raise ValueError("episode index must be >= 0")
    return alpha0 * beta ** episode


@dataclass
class Transition:
    """One robot-step: embedded observation, boxed action and its stats."""

    robot_id: int
    t: int                       # global step index (monotone across episodes)
    embedded_obs: np.ndarray     # (obs_dim,)
    local_feats: np.ndarray      # (LOCAL_DIM,) normalized local block
    neighbor_feats: np.ndarray   # (n, NEIGHBOR_DIM) normalized neighbor rows
    action: np.ndarray           # boxed action
    pre_squash: np.ndarray       # Gaussian sample before squashing
    log_prob: float
    value: float
    reward: float
    done: bool


class RolloutBuffer:
    """Transitions grouped per robot in time order."""

    def __init__(self):
        self._streams: dict[int, list[Transition]] = {}

    def add(self, transition: Transition) -> None:
        self._streams.setdefault(transition.robot_id, []).append(transition)

    def __len__(self) -> int:
        return sum(len(s) for s in self._streams.values())

    def robot_ids(self) -> list[int]:
        return sorted(self._streams)

    def stream(self, robot_id: int) -> list[Transition]:
        return self._streams.get(robot_id, [])

    def ordered(self) -> list[Transition]:
        """Flat view sorted by (timestep, robot_id); deterministic."""
        merged = [tr for stream in self._streams.values() for tr in stream]
        merged.sort(key=lambda tr: (tr.t, tr.robot_id))
        return merged

    def mark_episode_end(self) -> None:
        """Terminate every open stream (episode truncation)."""
        for stream in self._streams.values():
            if stream:
                stream[-1].done = True

    def clear(self) -> None:
        self._streams.clear()


def compute_advantages(
    buffer: RolloutBuffer,
    gamma: float,
    tau: float,
    bootstrap_values: Optional[dict[int, float]] = None,
    normalize: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-transition advantages and return targets, aligned with
    ``buffer.ordered()``.

    The recursion runs backwards through each robot's own stream; a done
    flag truncates it, otherwise the stream tail bootstraps from the
    supplied value (0.0 when absent). With tau=0 the advantages reduce to
    one-step TD residuals. Normalization is zero-mean/unit-variance over
    the whole batch.
    """
    bootstrap_values = bootstrap_values or {}
    results: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for robot_id in buffer.robot_ids():
        stream = buffer.stream(robot_id)
        n = len(stream)
        adv = np.zeros(n)
        next_value = bootstrap_values.get(robot_id, 0.0)
        gae = 0.0
        for k in range(n - 1, -1, -1):
            tr = stream[k]
            mask = 0.0 if tr.done else 1.0
            delta = tr.reward + gamma * next_value * mask - tr.value
            gae = delta + gamma * tau * mask * gae
            adv[k] = gae
            next_value = tr.value
        values = np.array([tr.value for tr in stream])
        results[robot_id] = (adv, adv + values)

    cursor = {robot_id: 0 for robot_id in results}
    ordered = buffer.ordered()
    advantages = np.zeros(len(ordered))
    returns = np.zeros(len(ordered))
    for idx, tr in enumerate(ordered):
        k = cursor[tr.robot_id]
        advantages[idx] = results[tr.robot_id][0][k]
        returns[idx] = results[tr.robot_id][1][k]
        cursor[tr.robot_id] = k + 1
    if normalize and len(ordered) > 0 and np.all(np.isfinite(advantages)):
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    return advantages, returns


@dataclass
class UpdateStats:
    n_transitions: int
    policy_loss: float
    value_loss: float
    entropy: float
    aborted: bool = False


def clipped_surrogate(ratio: np.ndarray, advantage: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-sample min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    return np.minimum(ratio * advantage,
                      np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage)


def ppo_update(
    policy: PolicyBundle,
    buffer: RolloutBuffer,
    config: PpoConfig,
    lr: float,
    bootstrap_values: Optional[dict[int, float]] = None,
) -> UpdateStats:
    """One PPO update over everything in the buffer; clears it afterwards.

    Loss is -L_clip + c1 * value MSE - c2 * entropy, minimized for K epochs
    with Adam. Observations are re-embedded with the current encoder each
    epoch so the encoder trains jointly with both heads. A non-finite loss
    aborts before touching the parameters.
    """
    ordered = buffer.ordered()
    if not ordered:
        return UpdateStats(0, 0.0, 0.0, 0.0)
    advantages, returns = compute_advantages(
        buffer, config.gamma, config.tau, bootstrap_values)

    n = len(ordered)
    old_log_prob = np.array([tr.log_prob for tr in ordered])
    u = np.stack([tr.pre_squash for tr in ordered])
    local_feats = [tr.local_feats for tr in ordered]
    neighbor_feats = [tr.neighbor_feats for tr in ordered]

    log_std = policy.log_std
    std_interior = ((log_std > policy_mod.LOG_STD_MIN)
                    & (log_std < policy_mod.LOG_STD_MAX)).astype(float)
    stats = UpdateStats(n, 0.0, 0.0, 0.0)

    for _ in range(config.epochs):
        obs, embed_cache = observation.embed_batch_cached(
            local_feats, neighbor_feats, policy.encoder)
        new_log_prob, values, mean, actor_cache, critic_cache = \
            policy_mod.evaluate_actions(policy, obs, u)

        # Non-finite rewards or exploding ratios surface as a non-finite
        # loss and abort below; silence the intermediate arithmetic.
        with np.errstate(invalid="ignore", over="ignore"):
            ratio = np.exp(new_log_prob - old_log_prob)
            unclipped = ratio * advantages
            clipped = np.clip(ratio, 1.0 - config.epsilon, 1.0 + config.epsilon) * advantages
            surrogate = np.minimum(unclipped, clipped)
            policy_loss = -surrogate.mean()
            value_err = values - returns
            value_loss = float(np.mean(value_err ** 2))
            ent = policy_mod.entropy(policy)
            loss = policy_loss + config.c1 * value_loss - config.c2 * ent

        stats.policy_loss, stats.value_loss, stats.entropy = float(policy_loss), value_loss, ent
        if not math.isfinite(loss):
            stats.aborted = True
            buffer.clear()
            return stats

        # d(-mean surrogate)/d new_log_prob: gradient flows only where the
        # min picked the unclipped branch.
        active = (unclipped <= clipped).astype(float)
        dlogp = -(advantages * ratio * active) / n

        var = np.exp(2.0 * np.clip(log_std, policy_mod.LOG_STD_MIN, policy_mod.LOG_STD_MAX))
        diff = u - mean
        grad_mean = dlogp[:, None] * (diff / var)
        # Small pull toward the responsive region of the squash: deep in the
        # tanh tail all samples collapse onto the box edge, advantages
        # flatten and the policy gradient loses its restoring force.
        grad_mean += (2.0 * config.mean_reg / n) * mean
        grad_log_std = (dlogp[:, None] * (diff ** 2 / var - 1.0)).sum(axis=0)
        grad_log_std -= config.c2  # entropy term, d entropy/d log_std = 1
        grad_log_std *= std_interior

        grad_values = (2.0 * config.c1 / n) * value_err

        actor_tape, grad_obs_actor = neural.backward(policy.actor, actor_cache, grad_mean)
        critic_tape, grad_obs_critic = neural.backward(
            policy.critic, critic_cache, grad_values[:, None])
        encoder_tape = observation.embed_batch_backward(
            embed_cache, grad_obs_actor + grad_obs_critic, policy.encoder)

        grads = (encoder_tape.grads + actor_tape.grads
                 + [grad_log_std] + critic_tape.grads)
        if not all(np.all(np.isfinite(g)) for g in grads):
            stats.aborted = True
            buffer.clear()
            return stats
        neural.adam_step(policy.parameters(), grads, policy.adam, lr)

    # Extra critic-only fitting keeps the value estimate sharp enough to
    # carry long-horizon hazard signals past the advantage-estimation
    # horizon; the encoder stays frozen here so value fitting cannot skew
    # the shared features.
    if config.value_extra_epochs > 0:
        obs, _ = observation.embed_batch_cached(local_feats, neighbor_feats,
                                                policy.encoder)
        for _ in range(config.value_extra_epochs):
            values, critic_cache = neural.forward_cached(policy.critic, obs)
            value_err = values[:, 0] - returns
            grad_values = (2.0 * config.c1 / n) * value_err
            critic_tape, _ = neural.backward(policy.critic, critic_cache,
                                             grad_values[:, None])
            if not all(np.all(np.isfinite(g)) for g in critic_tape.grads):
                stats.aborted = True
                buffer.clear()
                return stats
            neural.adam_step(policy.critic.parameters(), critic_tape.grads,
                             policy.value_adam, lr)
        stats.value_loss = float(np.mean((neural.forward(policy.critic, obs)[:, 0]
                                          - returns) ** 2))

    buffer.clear()
    return stats
