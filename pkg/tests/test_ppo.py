import numpy as np
import pytest

from rpfnav import policy as policy_mod
from rpfnav.observation import LOCAL_DIM, NEIGHBOR_DIM
from rpfnav.policy import build_policy, rpf_box, save_policy
from rpfnav.ppo import (
    PpoConfig,
    RolloutBuffer,
    Transition,
    clipped_surrogate,
    compute_advantages,
    lr_schedule,
    ppo_update,
)


def make_transition(robot_id, t, reward, value, done, rng, embed_dim=8):
    obs_dim = LOCAL_DIM + embed_dim
    return Transition(
        robot_id=robot_id, t=t,
        embedded_obs=rng.normal(size=obs_dim),
        local_feats=rng.normal(size=LOCAL_DIM),
        neighbor_feats=rng.normal(size=(int(rng.integers(0, 3)), NEIGHBOR_DIM)),
        action=np.array([0.05, 2.5]),
        pre_squash=rng.normal(size=2),
        log_prob=float(rng.normal()),
        value=value, reward=reward, done=done)


def tiny_policy(seed=0, embed_dim=8):
    return build_policy(rpf_box(), np.random.default_rng(seed),
                        embed_dim=embed_dim, hidden=16)


def fill_buffer(rng, n_steps=12, robots=(0, 1), embed_dim=8):
    buffer = RolloutBuffer()
    for t in range(n_steps):
        for rid in robots:
            buffer.add(make_transition(rid, t, float(rng.normal()),
                                       float(rng.normal()), t == n_steps - 1,
                                       rng, embed_dim))
    return buffer


def test_lr_schedule_initial_value():
    assert lr_schedule(3e-4, 0.999, 0) == 3e-4


def test_lr_schedule_one_step():
    assert lr_schedule(3e-4, 0.999, 1) == pytest.approx(2.997e-4, abs=1e-12)


def test_lr_schedule_thousand_episodes():
    # Independent oracle: repeated multiplication.
    expected = 3e-4
    for _ in range(1000):
        expected *= 0.999
    value = lr_schedule(3e-4, 0.999, 1000)
    assert value == pytest.approx(expected, rel=1e-12)
    assert value == pytest.approx(1.103e-4, abs=1e-7)


def test_gae_single_terminal_transition():
    rng = np.random.default_rng(0)
    buffer = RolloutBuffer()
    buffer.add(make_transition(0, 0, reward=1.0, value=0.0, done=True, rng=rng))
    adv, ret = compute_advantages(buffer, gamma=0.999, tau=0.9, normalize=False)
    assert adv[0] == pytest.approx(1.0, abs=1e-15)
    assert ret[0] == pytest.approx(1.0, abs=1e-15)


def test_gae_constant_value_telescopes_to_zero():
    # Zero rewards, constant value v, gamma = 1, non-terminal window with a
    # bootstrap of v: every delta is v - v = 0, so advantages vanish.
    rng = np.random.default_rng(1)
    v = 3.7
    buffer = RolloutBuffer()
    for t in range(3):
        buffer.add(make_transition(0, t, reward=0.0, value=v, done=False, rng=rng))
    adv, _ = compute_advantages(buffer, gamma=1.0, tau=0.9,
                                bootstrap_values={0: v}, normalize=False)
    assert np.allclose(adv, 0.0, atol=1e-12)


def test_gae_tau_zero_is_one_step_td():
    rng = np.random.default_rng(2)
    buffer = RolloutBuffer()
    rewards = [1.0, -2.0, 0.5, 4.0]
    values = [0.3, 1.1, -0.4, 0.9]
    for t, (r, v) in enumerate(zip(rewards, values)):
        buffer.add(make_transition(0, t, reward=r, value=v, done=t == 3, rng=rng))
    gamma = 0.97
    adv, _ = compute_advantages(buffer, gamma=gamma, tau=0.0, normalize=False)
    expected = [rewards[k] + gamma * values[k + 1] - values[k] for k in range(3)]
    expected.append(rewards[3] - values[3])
    assert np.max(np.abs(adv - np.array(expected))) < 1e-12


def test_gae_streams_do_not_cross_robots():
    rng = np.random.default_rng(3)
    mixed = RolloutBuffer()
    solo = {0: RolloutBuffer(), 1: RolloutBuffer()}
    for t in range(6):
        for rid in (0, 1):
            tr = make_transition(rid, t, float(rng.normal()), float(rng.normal()),
                                 t == 5, rng)
            mixed.add(tr)
            solo[rid].add(tr)
    adv_mixed, _ = compute_advantages(mixed, 0.99, 0.9, normalize=False)
    ordered = mixed.ordered()
    for rid in (0, 1):
        adv_solo, _ = compute_advantages(solo[rid], 0.99, 0.9, normalize=False)
        from_mixed = [a for a, tr in zip(adv_mixed, ordered) if tr.robot_id == rid]
        assert np.allclose(from_mixed, adv_solo, atol=0.0)


def test_advantages_normalized_by_default():
    rng = np.random.default_rng(4)
    buffer = fill_buffer(rng)
    adv, _ = compute_advantages(buffer, 0.999, 0.9)
    assert abs(adv.mean()) < 1e-9
    assert adv.std() == pytest.approx(1.0, abs=1e-6)


def test_clip_arithmetic_positive_advantage():
    # ratio 1.5 with eps 0.2 clips to 1.2 for A > 0.
    surr = clipped_surrogate(np.array([1.5]), np.array([2.0]), 0.2)
    assert surr[0] == pytest.approx(1.2 * 2.0)


def test_clip_arithmetic_negative_advantage():
    # ratio 0.5, A < 0: min(0.5*A, 0.8*A) = 0.8*A.
    a = -3.0
    surr = clipped_surrogate(np.array([0.5]), np.array([a]), 0.2)
    assert surr[0] == pytest.approx(0.8 * a)


def test_clip_inactive_at_ratio_one_matches_vanilla_gradient():
    # d surrogate / d ratio at ratio=1 equals A (the plain policy-gradient
    # coefficient), probed with central differences on the surrogate.
    for a in (2.0, -2.0):
        h = 1e-7
        up = clipped_surrogate(np.array([1.0 + h]), np.array([a]), 0.2)[0]
        down = clipped_surrogate(np.array([1.0 - h]), np.array([a]), 0.2)[0]
        assert (up - down) / (2 * h) == pytest.approx(a, rel=1e-6)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_clip_bound_for_positive_advantage(seed):
    rng = np.random.default_rng(seed)
    ratios = rng.uniform(0.0, 3.0, size=1000)
    advantages = rng.uniform(0.01, 5.0, size=1000)
    surr = clipped_surrogate(ratios, advantages, 0.2)
    assert np.all(np.abs(surr) <= 1.2 * np.abs(advantages) + 1e-12)


def test_ppo_update_changes_params_and_clears_buffer():
    policy = tiny_policy()
    rng = np.random.default_rng(5)
    buffer = fill_buffer(rng)
    before = [p.copy() for p in policy.parameters()]
    stats = ppo_update(policy, buffer, PpoConfig(), lr=1e-3)
    assert not stats.aborted
    assert stats.n_transitions == 24
    assert len(buffer) == 0
    assert any(not np.array_equal(a, b)
               for a, b in zip(before, policy.parameters()))


def test_ppo_update_deterministic_bit_identical():
    results = []
    for _ in range(2):
        policy = tiny_policy(seed=7)
        rng = np.random.default_rng(11)
        for _ in range(10):
            buffer = fill_buffer(rng)
            ppo_update(policy, buffer, PpoConfig(), lr=1e-3)
        results.append([p.copy() for p in policy.parameters()])
    for a, b in zip(*results):
        assert np.array_equal(a, b)


def test_ppo_update_aborts_on_nonfinite_and_keeps_params():
    policy = tiny_policy(seed=9)
    rng = np.random.default_rng(13)
    buffer = fill_buffer(rng)
    buffer.stream(0)[0].reward = float("inf")
    before = [p.copy() for p in policy.parameters()]
    stats = ppo_update(policy, buffer, PpoConfig(), lr=1e-3)
    assert stats.aborted
    for a, b in zip(before, policy.parameters()):
        assert np.array_equal(a, b)


def test_parameter_sharing_single_source_of_truth(tmp_path):
    # All robots act through one bundle: serializing the policy "per robot"
    # yields byte-identical checkpoints because there is only one parameter
    # set to serialize.
    policy = tiny_policy(seed=3)
    rng = np.random.default_rng(17)
    buffer = fill_buffer(rng, robots=(0, 1, 2))
    ppo_update(policy, buffer, PpoConfig(), lr=1e-3)
    digests = set()
    for robot_handle in range(3):
        path = tmp_path / f"robot{robot_handle}.npz"
        save_policy(path, policy, {"mode": "rpf"})
        digests.add(path.read_bytes())
    assert len(digests) == 1


def test_buffer_ordering_and_marking():
    rng = np.random.default_rng(19)
    buffer = RolloutBuffer()
    buffer.add(make_transition(1, 0, 0.0, 0.0, False, rng))
    buffer.add(make_transition(0, 0, 0.0, 0.0, False, rng))
    buffer.add(make_transition(0, 1, 0.0, 0.0, False, rng))
    ordered = buffer.ordered()
    assert [(tr.t, tr.robot_id) for tr in ordered] == [(0, 0), (0, 1), (1, 0)]
    buffer.mark_episode_end()
    assert buffer.stream(0)[-1].done
    assert buffer.stream(1)[-1].done


def test_config_validation():
    PpoConfig().validate()
    with pytest.raises(ValueError):
        PpoConfig(epsilon=1.5).validate()
    with pytest.raises(ValueError):
        PpoConfig(gamma=0.0).validate()
    with pytest.raises(ValueError):
        lr_schedule(3e-4, 0.999, -1)


def test_update_entropy_pressure_grows_log_std():
    # With zero advantages the policy term is flat; the entropy bonus alone
    # should push log_std upward.
    policy = tiny_policy(seed=21)
    rng = np.random.default_rng(23)
    buffer = RolloutBuffer()
    for t in range(8):
        tr = make_transition(0, t, reward=0.0, value=0.0, done=t == 7, rng=rng)
        buffer.add(tr)
    before = policy.log_std.copy()
    ppo_update(policy, buffer, PpoConfig(c2=0.5), lr=1e-2)
    assert np.all(policy.log_std >= before)
