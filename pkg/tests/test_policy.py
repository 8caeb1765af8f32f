import numpy as np
import pytest

from rpfnav import neural
from rpfnav.policy import (
    ActionBox,
    build_policy,
    deterministic_action,
    load_policy,
    rpf_box,
    sample_action,
    save_policy,
    squash,
    steering_box,
    unsquash,
)


@pytest.fixture(scope="module")
def policy():
    return build_policy(rpf_box(), np.random.default_rng(42))


def test_boxes():
    box = rpf_box()
    assert np.allclose(box.center, [0.05, 2.5])
    assert np.allclose(box.halfwidth, [0.05, 2.5])
    assert steering_box().dim == 1
    with pytest.raises(ValueError):
        ActionBox(np.array([1.0]), np.array([1.0]))


def test_deterministic_action_is_squashed_mean(policy):
    obs = np.random.default_rng(0).normal(size=policy.actor.in_dim)
    mean = neural.forward(policy.actor, obs)
    assert np.array_equal(deterministic_action(policy, obs), squash(mean, policy.box))


def test_squash_unsquash_round_trip():
    box = rpf_box()
    u = np.array([[0.3, -1.2], [2.0, 0.0]])
    a = squash(u, box)
    assert np.allclose(unsquash(a, box), u, atol=1e-9)


def test_actions_never_leave_box(policy):
    rng = np.random.default_rng(1)
    obs = rng.normal(size=(200, policy.actor.in_dim))
    # 500 batched draws of 200 -> 1e5 samples total
    low, high = policy.box.low, policy.box.high
    for _ in range(500):
        sample = sample_action(policy, obs, rng)
        assert np.all(sample.action >= low) and np.all(sample.action <= high)


def test_sample_mean_near_box_center_for_zero_mean_actor():
    # Zero the actor output so the pre-squash mean sits at 0 (box center).
    policy = build_policy(rpf_box(), np.random.default_rng(7))
    policy.actor.layers[-1].weights[:] = 0.0
    policy.actor.layers[-1].bias[:] = 0.0
    rng = np.random.default_rng(11)
    obs = np.zeros((100_000, policy.actor.in_dim))
    sample = sample_action(policy, obs, rng)
    center = policy.box.center
    assert np.all(np.abs(sample.action.mean(axis=0) - center) <= 0.02 * center)


def test_log_prob_density_integrates_to_one():
    # 1-D steering head: quadrature over the action box must give mass ~1.
    policy = build_policy(steering_box(), np.random.default_rng(3))
    obs = np.random.default_rng(5).normal(size=policy.actor.in_dim)
    actions = np.linspace(-2.5 + 1e-6, 2.5 - 1e-6, 20_001)[:, None]
    log_probs = []
    from rpfnav.policy import _log_prob_given_u
    mean = neural.forward(policy.actor, obs)
    for a in actions:
        u = unsquash(a, policy.box)
        log_probs.append(_log_prob_given_u(u, mean, policy.log_std, policy.box))
    density = np.exp(np.array(log_probs)).ravel()
    mass = np.trapezoid(density, actions.ravel())
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_sample_log_prob_consistent_with_evaluate(policy):
    rng = np.random.default_rng(9)
    obs = rng.normal(size=(16, policy.actor.in_dim))
    sample = sample_action(policy, obs, rng)
    from rpfnav.policy import evaluate_actions
    log_prob, values, _, _, _ = evaluate_actions(policy, obs, sample.pre_squash)
    assert np.allclose(log_prob, sample.log_prob, atol=1e-12)
    assert np.allclose(values, sample.value, atol=1e-12)


def test_single_observation_shape(policy):
    rng = np.random.default_rng(13)
    obs = rng.normal(size=policy.actor.in_dim)
    sample = sample_action(policy, obs, rng)
    assert sample.action.shape == (2,)
    assert np.ndim(sample.log_prob) == 0
    assert np.ndim(sample.value) == 0


def test_save_load_round_trip_bit_exact(tmp_path, policy):
    path = tmp_path / "policy.npz"
    save_policy(path, policy, {"mode": "rpf"})
    loaded, meta = load_policy(path)
    assert meta["mode"] == "rpf"
    for a, b in zip(policy.parameters(), loaded.parameters()):
        assert np.array_equal(a, b)
    for a, b in zip(policy.adam.m + policy.adam.v, loaded.adam.m + loaded.adam.v):
        assert np.array_equal(a, b)
    assert loaded.adam.t == policy.adam.t
    obs = np.random.default_rng(17).normal(size=policy.actor.in_dim)
    assert np.array_equal(deterministic_action(policy, obs),
                          deterministic_action(loaded, obs))
