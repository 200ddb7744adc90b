"""Rollout collection, the PPO training loop and paired tracking evaluation."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from cocarry.autodiff.optim import AdamState
from cocarry.config import PPOConfig, RandomizationConfig
from cocarry.exceptions import DivergenceError
from cocarry.log import get_logger
from cocarry.ppo.algorithm import Rollout, UpdateStats, ppo_update
from cocarry.ppo.env import ToyEnvState, env_reset, env_step, observe, reset_done, tracking_error
from cocarry.ppo.policy import GaussianPolicy, PolicySpec, init_policy, policy_forward, value
from cocarry.seeding import substream
from cocarry.types import TrackingScores

logger = get_logger(__name__)

CURVE_COLUMNS = ["update", "mean_reward", "tracking_error", "clip_fraction", "approx_kl", "value_loss", "epochs"]


def training_randomization(rand: RandomizationConfig, baseline: bool) -> RandomizationConfig:
    """Baseline mode trains without payload randomization (payload pinned to 0 N)."""
    return rand.model_copy(update={"randomize_payload": False}) if baseline else rand


def collect_rollout(
    state: ToyEnvState,
    policy: GaussianPolicy,
    rand: RandomizationConfig,
    length: int,
    rng: np.random.Generator,
    sigma: float,
) -> Tuple[Rollout, ToyEnvState, Dict[str, float]]:
    """Step every environment ``length`` times with sampled actions; finished episodes restart."""
    obs_list, critic_list, actions, log_probs, values, rewards, dones = [], [], [], [], [], [], []
    errors = []
    for _ in range(length):
        obs = observe(state)
        action, logp, v = policy_forward(obs.actor, policy, "sample", rng, critic_obs=obs.critic)
        result = env_step(state, action, rand, sigma)
        obs_list.append(obs.actor)
        critic_list.append(obs.critic)
        actions.append(action)
        log_probs.append(logp)
        values.append(v)
        rewards.append(result.reward)
        dones.append(result.done.astype(np.float64))
        errors.append(tracking_error(result.state))
        state = reset_done(result.state, rand, result.done)
    last_values = value(observe(state).critic, policy)
    rollout = Rollout(
        obs=np.stack(obs_list),
        critic_obs=np.stack(critic_list),
        actions=np.stack(actions),
        log_probs=np.stack(log_probs),
        values=np.stack(values),
        rewards=np.stack(rewards),
        dones=np.stack(dones),
        last_values=last_values,
    )
    summary = {"mean_reward": float(np.mean(rewards)), "tracking_error": float(np.mean(errors))}
    return rollout, state, summary


def train_ppo(
    config: PPOConfig,
    rand: RandomizationConfig,
    seed: int,
    baseline: bool = False,
    updates: Optional[int] = None,
    curve_path: Optional[Union[str, Path]] = None,
    policy: Optional[GaussianPolicy] = None,
) -> Tuple[GaussianPolicy, pd.DataFrame]:
    """Alternate rollouts and updates; returns the policy and the per-update curves.

    On divergence the curves gathered so far are written before the error propagates.
    """
    rand = training_randomization(rand, baseline)
    mode = "baseline" if baseline else "adaptive"
    policy = policy or init_policy(PolicySpec.from_config(config), seed, config.init_log_std)
    optimizer = AdamState.for_params(policy.params)
    state = env_reset(rand, seed, config.num_envs, episode_length_s=config.episode_length_s)

    rows: List[Dict[str, Any]] = []
    total = config.updates if updates is None else updates
    for update in range(total):
        rollout, state, summary = collect_rollout(
            state, policy, rand, config.rollout_length, substream(seed, "ppo", mode, "act", update), config.reward_sigma
        )
        rollout.finish(config.gamma, config.lam)
        try:
            policy, optimizer, stats = ppo_update(rollout, policy, optimizer, config, substream(seed, "ppo", mode, "update", update))
        except DivergenceError:
            _flush_curves(rows, curve_path)
            raise
        rows.append(_curve_row(update, summary, stats))
        logger.info(
            "%s update %d/%d  reward %.4f  tracking %.4f  clip %.3f  kl %.4f",
            mode,
            update + 1,
            total,
            summary["mean_reward"],
            summary["tracking_error"],
            stats.clip_fraction,
            stats.approx_kl,
        )
    return policy, _flush_curves(rows, curve_path)


def _curve_row(update: int, summary: Dict[str, float], stats: UpdateStats) -> Dict[str, Any]:
    return {
        "update": update,
        "mean_reward": summary["mean_reward"],
        "tracking_error": summary["tracking_error"],
        "clip_fraction": stats.clip_fraction,
        "approx_kl": stats.approx_kl,
        "value_loss": stats.value_loss,
        "epochs": stats.epochs,
    }


def _flush_curves(rows: List[Dict[str, Any]], path: Optional[Union[str, Path]]) -> pd.DataFrame:
    curves = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        curves.to_csv(path, index=False, float_format="%.10g")
    return curves


def evaluate_tracking(
    policy: GaussianPolicy,
    rand: RandomizationConfig,
    payload_force: float,
    episodes: int,
    seed: int,
    episode_length_s: float = 20.0,
    sigma: float = 0.25,
) -> TrackingScores:
    """Mean absolute velocity-tracking error under a fixed payload, deterministic actions.

    All episodes run in parallel from ``env_reset(rand, seed, episodes)``, so two
    policies evaluated with the same seed face identical environments.
    """
    state = env_reset(rand, seed, episodes, payload_force=payload_force, episode_length_s=episode_length_s)
    errors, rewards = [], []
    for _ in range(state.episode_steps):
        action, _, _ = policy_forward(observe(state).actor, policy, "mean")
        result = env_step(state, action, rand, sigma)
        state = result.state
        errors.append(tracking_error(state))
        rewards.append(result.reward)
    per_episode = np.mean(np.stack(errors), axis=0)
    return {
        "payload_force": float(payload_force),
        "episodes": float(episodes),
        "tracking_error": float(per_episode.mean()),
        "tracking_error_std": float(per_episode.std()),
        "mean_reward": float(np.mean(rewards)),
    }
