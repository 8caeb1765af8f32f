import numpy as np
import pytest

from rpfnav.policy import save_policy
from rpfnav.ppo import PpoConfig
from rpfnav.simulator import Mode
from rpfnav.training import Trainer, TrainConfig


def short_config(**overrides):
    ppo = PpoConfig(update_interval=20, steps_per_episode=60, episodes=3)
    defaults = dict(ppo=ppo, n_robots=3, seed=0)
    defaults.update(overrides)
    return TrainConfig(**defaults)


def test_history_shape_and_update_cadence():
    trainer = Trainer(short_config())
    history = trainer.run()
    assert len(history) == 3
    for stats in history:
        assert stats.steps <= 60
        # One update per full interval actually stepped.
        assert stats.n_updates == stats.steps // 20
        assert np.isfinite(stats.return_mean)
        assert 0 <= stats.arrivals + stats.collisions <= 3


def test_learning_rate_decays_per_episode():
    trainer = Trainer(short_config())
    history = trainer.run()
    lrs = [stats.lr for stats in history]
    assert lrs[0] == pytest.approx(3e-4)
    assert lrs[1] == pytest.approx(3e-4 * 0.999)
    assert all(a > b for a, b in zip(lrs, lrs[1:]))


def test_training_deterministic_for_seed(tmp_path):
    digests = []
    for run in range(2):
        trainer = Trainer(short_config(seed=11))
        trainer.run()
        path = tmp_path / f"run{run}.npz"
        save_policy(path, trainer.policy, {})
        digests.append(path.read_bytes())
    assert digests[0] == digests[1]


def test_different_seed_changes_training(tmp_path):
    payloads = []
    for seed in (0, 1):
        trainer = Trainer(short_config(seed=seed))
        trainer.run()
        path = tmp_path / f"seed{seed}.npz"
        save_policy(path, trainer.policy, {})
        payloads.append(path.read_bytes())
    assert payloads[0] != payloads[1]


def test_cluttered_and_alternating_kinds_run():
    trainer = Trainer(short_config(scenario_kind="both",
                                   ppo=PpoConfig(update_interval=20,
                                                 steps_per_episode=30,
                                                 episodes=2)))
    history = trainer.run()
    assert len(history) == 2


def test_vanilla_ppo_mode_trains_with_steering_head():
    trainer = Trainer(short_config(mode=Mode.VANILLA_PPO))
    assert trainer.policy.action_dim == 1
    history = trainer.run()
    assert len(history) == 3


def test_config_rejects_untrainable_mode():
    with pytest.raises(ValueError):
        TrainConfig(mode=Mode.VANILLA_APF).validate()
    with pytest.raises(ValueError):
        TrainConfig(scenario_kind="nope").validate()
