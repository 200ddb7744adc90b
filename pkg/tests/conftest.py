"""Pytest configuration and shared fixtures."""

import numpy as np
import pytest

from cocarry.config import DyadConfig, ExperimentConfig, IntentConfig, PPOConfig
from cocarry.diffusion.network import EpsNetConfig
from cocarry.dyad.dataset import TrainingSet

# Small enough for unit tests; geometry (H=2, S=4) differs from the defaults on purpose.
TINY_NET = dict(width=8, levels=2, blocks=1, horizon=2, block_size=4)


@pytest.fixture
def tiny_eps_config():
    return EpsNetConfig(**TINY_NET)


@pytest.fixture
def tiny_intent_config():
    return IntentConfig(diffusion_steps=10, sample_steps=5, width=8, levels=2, blocks=1, batch_size=4, epochs=1)


@pytest.fixture
def tiny_training_set():
    """Four windows whose force direction matches their constant velocity label."""
    directions = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    window = TINY_NET["horizon"] * TINY_NET["block_size"]
    force = np.zeros((4, window, 6))
    force[:, :, 3:5] = 10.0 * directions[:, None, :]
    torque = np.zeros((4, window, 6))
    torque[:, :, 5] = np.array([0.5, -0.5, 0.2, -0.2])[:, None]
    velocities = np.zeros((4, TINY_NET["horizon"], 3))
    velocities[:, :, :2] = 0.3 * directions[:, None, :]
    return TrainingSet(
        force,
        torque,
        velocities,
        trial=np.arange(4),
        kind=np.arange(4),
        payload=np.zeros(4),
    )


@pytest.fixture
def short_dyad_config():
    """One payload, one repetition and brief motions."""
    return DyadConfig(
        payloads=[0.0],
        repetitions=1,
        translation_duration=1.0,
        rotation_duration=1.0,
        rest_before=0.3,
        rest_after=0.5,
        variability=0.0,
    )


@pytest.fixture
def tiny_ppo_config():
    return PPOConfig(
        num_envs=4,
        rollout_length=8,
        epochs=1,
        minibatches=1,
        updates=1,
        hidden=8,
        hidden_layers=1,
        eval_episodes=2,
        episode_length_s=1.0,
    )


@pytest.fixture
def tiny_experiment(tmp_path, short_dyad_config, tiny_ppo_config):
    """Whole-pipeline config that runs in seconds."""
    return ExperimentConfig(
        seed=7,
        output_dir=str(tmp_path / "run"),
        dyad=short_dyad_config,
        intent=IntentConfig(diffusion_steps=10, sample_steps=2, width=8, levels=2, blocks=1, epochs=1, batch_size=64, window_stride=8),
        ppo=tiny_ppo_config,
    )


TINY_OVERRIDES = [
    "dyad.payloads=[0.0]",
    "dyad.repetitions=1",
    "dyad.translation_duration=1.0",
    "dyad.rotation_duration=1.0",
    "dyad.rest_before=0.3",
    "dyad.rest_after=0.5",
    "intent.diffusion_steps=10",
    "intent.sample_steps=2",
    "intent.width=8",
    "intent.levels=2",
    "intent.blocks=1",
    "intent.epochs=1",
    "intent.batch_size=64",
    "intent.window_stride=8",
    "ppo.num_envs=4",
    "ppo.rollout_length=8",
    "ppo.epochs=1",
    "ppo.minibatches=1",
    "ppo.updates=1",
    "ppo.hidden=8",
    "ppo.hidden_layers=1",
    "ppo.eval_episodes=2",
    "ppo.episode_length_s=1.0",
]


@pytest.fixture
def tiny_overrides():
    return list(TINY_OVERRIDES)
