"""Shared actor-critic policy over embedded observations.

One parameter set serves every robot. The actor MLP outputs the mean of a
diagonal Gaussian in an unbounded pre-squash space; samples are mapped into
the action box through tanh, and log-probabilities carry the change-of-
variables correction. The critic is a separate MLP head, and the neighbor
encoder is shared by both and trained with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import neural, observation

HIDDEN_WIDTH = 256

# Action boxes: (eta, lambda) for the reinforced field, scalar steering for
# the plain-PPO baseline.
RPF_ACTION_LOW = (0.0, 0.0)
RPF_ACTION_HIGH = (0.1, 5.0)
STEER_ACTION_LOW = (-2.5,)
STEER_ACTION_HIGH = (2.5,)

LOG_STD_MIN = -10.0
LOG_STD_MAX = 2.0


@dataclass(frozen=True)
class ActionBox:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        if np.any(self.high <= self.low):
            raise ValueError("action box needs high > low")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.low + self.high)

    @property
    def halfwidth(self) -> np.ndarray:
        return 0.5 * (self.high - self.low)

    @property
    def dim(self) -> int:
        return self.low.shape[0]


def rpf_box() -> ActionBox:
    return ActionBox(np.array(RPF_ACTION_LOW), np.array(RPF_ACTION_HIGH))


def steering_box() -> ActionBox:
    return ActionBox(np.array(STEER_ACTION_LOW), np.array(STEER_ACTION_HIGH))


@dataclass
class PolicyBundle:
    """Encoder, actor, critic, exploration log-std and optimizer moments.

    ``adam`` drives the joint update over all parameters; ``value_adam``
    backs the critic-only fitting passes that run after it.
    """

    encoder: neural.DenseNet
    actor: neural.DenseNet
    critic: neural.DenseNet
    log_std: np.ndarray
    box: ActionBox
    adam: neural.AdamState = None
    value_adam: neural.AdamState = None

    def __post_init__(self):
        if self.adam is None:
            self.adam = neural.AdamState.for_params(self.parameters())
        if self.value_adam is None:
            self.value_adam = neural.AdamState.for_params(self.critic.parameters())

    def parameters(self) -> list[np.ndarray]:
        return (self.encoder.parameters() + self.actor.parameters()
                + [self.log_std] + self.critic.parameters())

    @property
    def action_dim(self) -> int:
        return self.box.dim


def build_policy(box: ActionBox, rng: np.random.Generator,
                 embed_dim: int = observation.EMBED_DIM,
                 hidden: int = HIDDEN_WIDTH) -> PolicyBundle:
    """Fresh bundle: relu encoder, tanh MLPs, exploration std at half-box."""
    obs_dim = observation.LOCAL_DIM + embed_dim
    encoder = observation.make_encoder(rng, embed_dim)
    actor = neural.init_dense([obs_dim, hidden, hidden, box.dim],
                              ["tanh", "tanh", "identity"], rng)
    critic = neural.init_dense([obs_dim, hidden, hidden, 1],
                               ["tanh", "tanh", "identity"], rng)
    # Pre-squash space is normalized to unit halfwidth, so this is an
    # exploration std of half the box halfwidth in action units around the
    # box center.
    log_std = np.full(box.dim, math.log(0.5))
    return PolicyBundle(encoder=encoder, actor=actor, critic=critic,
                        log_std=log_std, box=box)


def squash(u: np.ndarray, box: ActionBox) -> np.ndarray:
    return box.center + box.halfwidth * np.tanh(u)


def unsquash(action: np.ndarray, box: ActionBox) -> np.ndarray:
    scaled = np.clip((action - box.center) / box.halfwidth, -1.0 + 1e-12, 1.0 - 1e-12)
    return np.arctanh(scaled)


def _log_prob_given_u(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray,
                      box: ActionBox) -> np.ndarray:
    """log pi(a) for a = squash(u): Gaussian density minus the tanh Jacobian."""
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    var = np.exp(2.0 * log_std)
    gaussian = -0.5 * (((u - mean) ** 2) / var + 2.0 * log_std + math.log(2.0 * math.pi))
    # log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), stable for large |u|
    log_det = 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u)) + np.log(box.halfwidth)
    return (gaussian - log_det).sum(axis=-1)


class ActionSample(NamedTuple):
    action: np.ndarray
    log_prob: np.ndarray
    value: np.ndarray
    pre_squash: np.ndarray


def sample_action(policy: PolicyBundle, embedded_obs: np.ndarray,
                  rng: np.random.Generator) -> ActionSample:
    """Draw box-bounded actions with log-probs and critic values.

    Accepts a single (obs_dim,) vector or a (batch, obs_dim) matrix;
    outputs keep the matching leading shape.
    """
    obs = np.asarray(embedded_obs, dtype=np.float64)
    squeeze = obs.ndim == 1
    if squeeze:
        obs = obs[None, :]
    mean = neural.forward(policy.actor, obs)
    std = np.exp(np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX))
    u = mean + std * rng.standard_normal(mean.shape)
    action = squash(u, policy.box)
    log_prob = _log_prob_given_u(u, mean, policy.log_std, policy.box)
    value = neural.forward(policy.critic, obs)[:, 0]
    if squeeze:
        return ActionSample(action[0], log_prob[0], value[0], u[0])
    return ActionSample(action, log_prob, value, u)


def deterministic_action(policy: PolicyBundle, embedded_obs: np.ndarray) -> np.ndarray:
    """Zero-variance limit: the squashed actor mean (evaluation mode)."""
    mean = neural.forward(policy.actor, embedded_obs)
    return squash(mean, policy.box)


def value_of(policy: PolicyBundle, embedded_obs: np.ndarray) -> np.ndarray:
    out = neural.forward(policy.critic, embedded_obs)
    return out[..., 0] if out.ndim > 1 else out[0]


def entropy(policy: PolicyBundle) -> float:
    """Entropy of the underlying Gaussian (per sample, pre-squash)."""
    log_std = np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX)
    return float(np.sum(log_std + 0.5 * (1.0 + math.log(2.0 * math.pi))))


def evaluate_actions(policy: PolicyBundle, obs: np.ndarray, u: np.ndarray):
    """Log-probs, values and the forward caches needed for the update pass."""
    mean, actor_cache = neural.forward_cached(policy.actor, obs)
    values, critic_cache = neural.forward_cached(policy.critic, obs)
    log_prob = _log_prob_given_u(u, mean, policy.log_std, policy.box)
    return log_prob, values[:, 0], mean, actor_cache, critic_cache


def save_policy(path, policy: PolicyBundle, extra_meta: dict | None = None) -> None:
    """Checkpoint the full bundle (parameters + Adam moments), bit-exact."""
    arrays: dict[str, np.ndarray] = {}
    for name, net in (("encoder", policy.encoder), ("actor", policy.actor),
                      ("critic", policy.critic)):
        for idx, layer in enumerate(net.layers):
            arrays[f"{name}.{idx}.w"] = layer.weights
            arrays[f"{name}.{idx}.b"] = layer.bias
    arrays["log_std"] = policy.log_std
    for idx, (m, v) in enumerate(zip(policy.adam.m, policy.adam.v)):
        arrays[f"adam.m.{idx}"] = m
        arrays[f"adam.v.{idx}"] = v
    for idx, (m, v) in enumerate(zip(policy.value_adam.m, policy.value_adam.v)):
        arrays[f"vadam.m.{idx}"] = m
        arrays[f"vadam.v.{idx}"] = v
    meta = {
        "box_low": list(map(float, policy.box.low)),
        "box_high": list(map(float, policy.box.high)),
        "activations": {
            name: [layer.activation for layer in net.layers]
            for name, net in (("encoder", policy.encoder), ("actor", policy.actor),
                              ("critic", policy.critic))
        },
        "adam_t": policy.adam.t,
        "value_adam_t": policy.value_adam.t,
    }
    if extra_meta:
        meta.update(extra_meta)
    neural.save_arrays(path, arrays, meta)


def load_policy(path) -> tuple[PolicyBundle, dict]:
    arrays, meta = neural.load_arrays(path)

    def rebuild(name: str) -> neural.DenseNet:
        acts = meta["activations"][name]
        layers = []
        for idx, act in enumerate(acts):
            layers.append(neural.Layer(weights=arrays[f"{name}.{idx}.w"],
                                       bias=arrays[f"{name}.{idx}.b"],
                                       activation=act))
        return neural.DenseNet(layers)

    box = ActionBox(np.array(meta["box_low"]), np.array(meta["box_high"]))
    bundle = PolicyBundle(encoder=rebuild("encoder"), actor=rebuild("actor"),
                          critic=rebuild("critic"), log_std=arrays["log_std"],
                          box=box, adam=neural.AdamState(m=[], v=[], t=meta["adam_t"]),
                          value_adam=neural.AdamState(m=[], v=[],
                                                      t=meta.get("value_adam_t", 0)))
    n_params = len(bundle.parameters())
    bundle.adam.m = [arrays[f"adam.m.{idx}"] for idx in range(n_params)]
    bundle.adam.v = [arrays[f"adam.v.{idx}"] for idx in range(n_params)]
    n_critic = len(bundle.critic.parameters())
    if "vadam.m.0" in arrays:
        bundle.value_adam.m = [arrays[f"vadam.m.{idx}"] for idx in range(n_critic)]
        bundle.value_adam.v = [arrays[f"vadam.v.{idx}"] for idx in range(n_critic)]
    else:
        bundle.value_adam = neural.AdamState.for_params(bundle.critic.parameters())
    return bundle, meta
