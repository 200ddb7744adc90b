"""
Generalized advantage estimation and the clipped PPO update.

The clipped surrogate and the clipped value loss are piecewise in the
parameters. Which branch each sample takes is decided numerically on the
current parameters and fed to the loss graph as a mask; the branch that is
pinned at a clip boundary enters as a constant.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Tuple

import numpy as np

from cocarry.autodiff.graph import Graph, backward, run_graph
from cocarry.autodiff.optim import AdamState, adam_step, clip_grad_norm
from cocarry.config import PPOConfig
from cocarry.exceptions import DivergenceError, ShapeError
from cocarry.log import get_logger
from cocarry.ppo.policy import GaussianPolicy, PolicySpec, action_mean, actor_head, critic_head, gaussian_log_prob, log_prob, value

logger = get_logger(__name__)


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_value: np.ndarray,
    gamma: float,
    lam: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Advantages and returns over the leading time axis.

    ``delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t`` and
    ``A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}``, with ``V_T = last_value``.
    Returns are ``A + V``. Advantages are not normalized here.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    last_value = np.asarray(last_value, dtype=np.float64)
    if values.shape != rewards.shape or dones.shape != rewards.shape:
        raise ShapeError(
            "Rewards, values and dones must be aligned",
            node="compute_gae",
            expected=rewards.shape,
            actual=(values.shape, dones.shape),
        )
    if last_value.shape != rewards.shape[1:]:
        raise ShapeError("Bootstrap value must match one time step", node="last_value", expected=rewards.shape[1:], actual=last_value.shape)

    advantages = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    next_value = last_value
    for t in range(rewards.shape[0] - 1, -1, -1):
        alive = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * alive - values[t]
        running = delta + gamma * lam * alive * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    centered = advantages - advantages.mean()
    std = centered.std()
    return centered / (std + 1e-8)


class SurrogateTerms(NamedTuple):
    objective: np.ndarray
    mask: np.ndarray
    constant: np.ndarray
    clip_fraction: float


def surrogate_terms(ratio: np.ndarray, advantages: np.ndarray, clip: float) -> SurrogateTerms:
    """Per-sample ``min(rho*A, clip(rho)*A)`` and the branch it came from.

    ``mask`` is 1 where the unclipped branch is selected (ties included);
    ``constant`` holds the clipped value where the other branch wins.
    """
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    raw = ratio * advantages
    bounded = clipped * advantages
    mask = (raw <= bounded).astype(np.float64)
    objective = np.minimum(raw, bounded)
    fraction = float(np.mean(np.abs(ratio - 1.0) > clip)) if ratio.size else 0.0
    return SurrogateTerms(objective, mask, (1.0 - mask) * bounded, fraction)


def value_terms(values: np.ndarray, old_values: np.ndarray, returns: np.ndarray, clip: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mask and constant of ``max((V-R)^2, (V_clip-R)^2)``.

    Where the clipped prediction sits inside the band it equals ``V`` and the
    unclipped branch is used; outside it is constant in the parameters.
    """
    clipped = old_values + np.clip(values - old_values, -clip, clip)
    raw = (values - returns) ** 2
    bounded = (clipped - returns) ** 2
    inside = np.abs(values - old_values) <= clip
    mask = ((raw >= bounded) | inside).astype(np.float64)
    return mask, (1.0 - mask) * bounded


def approx_kl(ratio: np.ndarray) -> float:
    """Non-negative estimator ``mean((rho - 1) - log rho)``."""
    return float(np.mean((ratio - 1.0) - np.log(ratio))) if ratio.size else 0.0


@lru_cache(maxsize=8)
def ppo_loss_graph(spec: PolicySpec, batch: int, value_coef: float, entropy_coef: float) -> Graph:
    """Loss ``-surrogate + c1*value_loss - c2*entropy`` with named nodes for each term."""
    g = Graph("ppo_loss")
    mean, log_std = actor_head(g, spec, batch)
    values = critic_head(g, spec, batch)
    actions = g.input("actions", (batch, spec.action_dim))
    old_logp = g.input("old_logp", (batch,))
    adv = g.input("advantages", (batch,))
    surr_mask = g.input("surr_mask", (batch,))
    surr_const = g.input("surr_const", (batch,))
    returns = g.input("returns", (batch,))
    value_mask = g.input("value_mask", (batch,))
    value_const = g.input("value_const", (batch,))

    logp = gaussian_log_prob(g, mean, log_std, actions, spec.action_dim)
    ratio = g.exp(g.sub(logp, old_logp))
    surrogate = g.mean(g.add(g.mul(g.mul(ratio, adv), surr_mask), surr_const), name="surrogate")
    value_loss = g.mean(g.add(g.mul(g.square(g.sub(values, returns)), value_mask), value_const), name="value_loss")
    entropy = g.add(g.sum(log_std), g.const(0.5 * spec.action_dim * (1.0 + np.log(2.0 * np.pi))), name="entropy")
    loss = g.add(g.scale(surrogate, -1.0), g.scale(value_loss, value_coef))
    g.set_output(g.add(loss, g.scale(entropy, -entropy_coef), name="loss"))
    return g.freeze()


@dataclass
class Rollout:
    """Time-major ``(T, N, ...)`` experience from parallel environments."""

    obs: np.ndarray
    critic_obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray
    advantages: np.ndarray = field(default_factory=lambda: np.zeros(0))
    returns: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def finish(self, gamma: float, lam: float) -> "Rollout":
        self.advantages, self.returns = compute_gae(self.rewards, self.values, self.dones, self.last_values, gamma, lam)
        return self

    def flat(self) -> Dict[str, np.ndarray]:
        size = self.rewards.size
        return {
            "obs": self.obs.reshape(size, -1),
            "critic_obs": self.critic_obs.reshape(size, -1),
            "actions": self.actions.reshape(size, -1),
            "old_logp": self.log_probs.reshape(size),
            "old_values": self.values.reshape(size),
            "advantages": self.advantages.reshape(size),
            "returns": self.returns.reshape(size),
        }


@dataclass
class UpdateStats:
    clip_fraction: float = 0.0
    approx_kl: float = 0.0
    surrogate: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    grad_norm: float = 0.0
    epochs: int = 0
    early_stopped: bool = False


def minibatch_feeds(
    policy: GaussianPolicy,
    batch: Dict[str, np.ndarray],
    config: PPOConfig,
) -> Tuple[Dict[str, np.ndarray], float, float]:
    """Graph feeds for one minibatch plus its clip fraction and approximate KL."""
    adv = batch["advantages"]
    if config.normalize_advantages and adv.size > 1:
        adv = normalize_advantages(adv)
    mean = action_mean(batch["obs"], policy)
    ratio = np.exp(log_prob(batch["actions"], mean, policy.log_std) - batch["old_logp"])
    surr = surrogate_terms(ratio, adv, config.clip)
    if config.value_clip:
        current = value(batch["critic_obs"], policy)
        value_mask, value_const = value_terms(current, batch["old_values"], batch["returns"], config.clip)
    else:
        value_mask, value_const = np.ones_like(adv), np.zeros_like(adv)
    feeds = {
        **policy.params,
        "obs": batch["obs"],
        "critic_obs": batch["critic_obs"],
        "actions": batch["actions"],
        "old_logp": batch["old_logp"],
        "advantages": adv,
        "surr_mask": surr.mask,
        "surr_const": surr.constant,
        "returns": batch["returns"],
        "value_mask": value_mask,
        "value_const": value_const,
    }
    return feeds, surr.clip_fraction, approx_kl(ratio)


def ppo_update(
    rollout: Rollout,
    policy: GaussianPolicy,
    optimizer: AdamState,
    config: PPOConfig,
    rng: np.random.Generator,
) -> Tuple[GaussianPolicy, AdamState, UpdateStats]:
    """Minibatch epochs of the clipped objective with global gradient clipping.

    Every epoch visits each sample once; minibatch sizes differ by at most one.
    After each epoch whose mean approximate KL exceeds ``config.kl_target`` the
    remaining epochs are skipped.
    """
    if rollout.rewards.size == 0:
        raise ShapeError("Rollout is empty", node="rollout")
    data = rollout.flat()
    size = data["advantages"].shape[0]
    minibatches = min(config.minibatches, size)
    graphs = {
        len(part): ppo_loss_graph(policy.spec, len(part), float(config.value_coef), float(config.entropy_coef))
        for part in np.array_split(np.arange(size), minibatches)
    }

    stats = UpdateStats()
    clip_fractions: List[float] = []
    kls: List[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(size)
        epoch_kl: List[float] = []
        for m, index in enumerate(np.array_split(order, minibatches)):
            feeds, clip_fraction, kl = minibatch_feeds(policy, {k: v[index] for k, v in data.items()}, config)
            trace = run_graph(graphs[len(index)], feeds)
            loss = float(trace["loss"])
            if not np.isfinite(loss):
                raise DivergenceError("PPO loss became non-finite", step=epoch * minibatches + m)
            grads, norm = clip_grad_norm(backward(trace), config.max_grad_norm)
            params, optimizer = adam_step(policy.params, grads, optimizer, config.lr)
            policy = GaussianPolicy(policy.spec, params)
            clip_fractions.append(clip_fraction)
            epoch_kl.append(kl)
            stats.surrogate = float(trace["surrogate"])
            stats.value_loss = float(trace["value_loss"])
            stats.entropy = float(trace["entropy"])
            stats.grad_norm = norm
        kls.extend(epoch_kl)
        stats.epochs = epoch + 1
        if float(np.mean(epoch_kl)) > config.kl_target and epoch + 1 < config.epochs:
            stats.early_stopped = True
            logger.warning(
                "approx KL %.4f above target %.4f; stopping after epoch %d/%d",
                float(np.mean(epoch_kl)),
                config.kl_target,
                epoch + 1,
                config.epochs,
            )
            break
    stats.clip_fraction = float(np.mean(clip_fractions))
    stats.approx_kl = float(np.mean(kls))
    return policy, optimizer, stats
