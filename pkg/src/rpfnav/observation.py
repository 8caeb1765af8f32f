"""Robot-local observations and the permutation-invariant mean embedding.

Each robot observes its nearest obstacle and goal in its own body frame
(the local block) plus distance/azimuth/relative-heading triples for every
visible neighbor. A shared one-layer relu encoder maps each
(local, neighbor) pair to a fixed-width code; averaging the codes gives a
fixed-length vector regardless of how many neighbors are in range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neural
from .geometry import RobotState, Obstacle, Vec2, WorldParams, nearest_obstacle_point, visible_neighbors, wrap_angle

LOCAL_DIM = 4
NEIGHBOR_DIM = 3
EMBED_DIM = 64
OBS_DIM = LOCAL_DIM + EMBED_DIM


@dataclass(frozen=True, slots=True)
class LocalBlock:
    """Nearest obstacle and goal, in the robot's body frame."""

    d_o: float
    phi_o: float
    d_g: float
    phi_g: float


@dataclass(frozen=True, slots=True)
class NeighborBlock:
    d_j: float
    phi_j: float
    psi_j: float


def build_observation(
    i: int,
    robots: list[RobotState],
    obstacles: list[Obstacle],
    params: WorldParams,
) -> tuple[LocalBlock, list[NeighborBlock]]:
    """Sense the world from robot i's pose.

    Azimuths are measured from the current heading and wrapped to (-pi, pi].
    When no obstacle surface lies within detection range the local block
    carries the (d_r, 0) sentinel. Neighbors come back nearest-first.
    """
    robot = robots[i]
    pos, psi = robot.position, robot.heading

    nearest = nearest_obstacle_point(pos, obstacles, params.d_r)
    if nearest is None:
        d_o, phi_o = params.d_r, 0.0
    else:
        surface, d_o = nearest
        phi_o = wrap_angle((surface - pos).angle() - psi)

    goal_offset = robot.goal - pos
    d_g = goal_offset.norm()
    phi_g = wrap_angle(goal_offset.angle() - psi) if d_g > 0.0 else 0.0

    local = LocalBlock(d_o=d_o, phi_o=phi_o, d_g=d_g, phi_g=phi_g)

    blocks = []
    for j in visible_neighbors(i, robots, params.d_r):
        other = robots[j]
        offset = other.position - pos
        blocks.append(NeighborBlock(
            d_j=offset.norm(),
            phi_j=wrap_angle(offset.angle() - psi),
            psi_j=wrap_angle(other.heading - psi),
        ))
    return local, blocks


def local_features(local: LocalBlock, params: WorldParams) -> np.ndarray:
    """Normalized local block: distances by range, angles by pi."""
    return np.array([
        local.d_o / params.d_r,
        local.phi_o / np.pi,
        local.d_g / params.d_m,
        local.phi_g / np.pi,
    ])


def neighbor_features(blocks: list[NeighborBlock], params: WorldParams) -> np.ndarray:
    """Normalized neighbor rows, sorted so float summation is deterministic."""
    ordered = sorted(blocks, key=lambda b: (b.d_j, b.phi_j, b.psi_j))
    if not ordered:
        return np.zeros((0, NEIGHBOR_DIM))
    return np.array([[b.d_j / params.d_r, b.phi_j / np.pi, b.psi_j / np.pi] for b in ordered])


def make_encoder(rng: np.random.Generator, embed_dim: int = EMBED_DIM) -> neural.DenseNet:
    """One-layer relu encoder over concatenated (local, neighbor) features."""
    return neural.init_dense([LOCAL_DIM + NEIGHBOR_DIM, embed_dim], ["relu"], rng)


def mean_embed(
    local: LocalBlock,
    neighbors: list[NeighborBlock],
    encoder: neural.DenseNet,
    params: WorldParams,
) -> np.ndarray:
    """Fixed-length observation vector [local features; mean neighbor code].

    The mean over an empty neighbor set is the zero vector, so the output
    length never depends on how many robots are visible.
    """
    loc = local_features(local, params)
    obs, _ = embed_batch_cached([loc], [neighbor_features(neighbors, params)], encoder)
    return obs[0]


def embed_batch_cached(
    local_feats: list[np.ndarray],
    neighbor_feats: list[np.ndarray],
    encoder: neural.DenseNet,
) -> tuple[np.ndarray, dict]:
    """Embed a batch of observations in one encoder pass.

    Stacks every neighbor row of every observation into a single matrix,
    runs the encoder once, and mean-reduces each observation's segment.
    Returns the (batch, OBS_DIM) observation matrix plus the cache needed
    by ``embed_batch_backward``.
    """
    batch = len(local_feats)
    embed_dim = encoder.out_dim
    locals_arr = np.asarray(local_feats, dtype=np.float64).reshape(batch, LOCAL_DIM)
    counts = np.array([feats.shape[0] for feats in neighbor_feats], dtype=np.int64)

    codes_mean = np.zeros((batch, embed_dim))
    cache = {"counts": counts, "encoder_cache": None, "rows_per_obs": None}
    total = int(counts.sum())
    if total > 0:
        rows = np.empty((total, LOCAL_DIM + NEIGHBOR_DIM))
        offsets = np.concatenate(([0], np.cumsum(counts)))
        for k in range(batch):
            lo, hi = offsets[k], offsets[k + 1]
            if hi > lo:
                rows[lo:hi, :LOCAL_DIM] = locals_arr[k]
                rows[lo:hi, LOCAL_DIM:] = neighbor_feats[k]
        # Shape-stable forward keeps each row's code bit-identical however
        # the batch is assembled (duplication and permutation invariance).
        codes, enc_cache = neural.forward_cached_stable(encoder, rows)
        for k in range(batch):
            lo, hi = offsets[k], offsets[k + 1]
            if hi > lo:
                codes_mean[k] = codes[lo:hi].mean(axis=0)
        cache["encoder_cache"] = enc_cache
        cache["offsets"] = offsets
    obs = np.concatenate([locals_arr, codes_mean], axis=1)
    return obs, cache


def embed_batch_backward(
    cache: dict,
    grad_obs: np.ndarray,
    encoder: neural.DenseNet,
) -> neural.GradientTape:
    """Encoder gradients given dLoss/dObservation for the cached batch."""
    tape = neural.GradientTape.zeros_like(encoder)
    if cache["encoder_cache"] is None:
        return tape
    counts = cache["counts"]
    offsets = cache["offsets"]
    total = int(counts.sum())
    grad_codes = np.zeros((total, encoder.out_dim))
    grad_mean = grad_obs[:, LOCAL_DIM:]
    for k, count in enumerate(counts):
        if count > 0:
            lo, hi = offsets[k], offsets[k + 1]
            grad_codes[lo:hi] = grad_mean[k] / count
    enc_tape, _ = neural.backward(encoder, cache["encoder_cache"], grad_codes)
    tape.add_(enc_tape)
    return tape
