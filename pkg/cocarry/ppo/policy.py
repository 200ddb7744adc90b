"""Gaussian actor-critic built from autodiff graphs."""

from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from cocarry.autodiff.graph import Graph, run_graph
from cocarry.autodiff.nn import init_params, mlp
from cocarry.config import PPOConfig
from cocarry.constants import ACTION_DIM, ACTOR_OBS_DIM, CRITIC_OBS_DIM
from cocarry.container import read_container, write_container
from cocarry.exceptions import ShapeError
from cocarry.seeding import substream

CHECKPOINT_KIND = "policy-checkpoint"
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PolicySpec:
    hidden: int = 64
    hidden_layers: int = 3
    actor_dim: int = ACTOR_OBS_DIM
    critic_dim: int = CRITIC_OBS_DIM
    action_dim: int = ACTION_DIM

    @classmethod
    def from_config(cls, config: PPOConfig) -> "PolicySpec":
        return cls(hidden=config.hidden, hidden_layers=config.hidden_layers)

    def actor_sizes(self) -> Tuple[int, ...]:
        return (self.actor_dim,) + (self.hidden,) * self.hidden_layers + (self.action_dim,)

    def critic_sizes(self) -> Tuple[int, ...]:
        return (self.critic_dim,) + (self.hidden,) * self.hidden_layers + (1,)


@dataclass
class GaussianPolicy:
    """MLP mean head, state-independent ``log_std`` and an MLP critic on privileged observations."""

    spec: PolicySpec
    params: Dict[str, np.ndarray]

    @property
    def log_std(self) -> np.ndarray:
        return self.params["log_std"]

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


def actor_head(g: Graph, spec: PolicySpec, batch: int) -> Tuple[str, str]:
    """Graph fragment ``obs -> (mean, log_std)``."""
    obs = g.input("obs", (batch, spec.actor_dim))
    mean = mlp(g, obs, "actor", spec.actor_sizes())
    log_std = g.param("log_std", (spec.action_dim,), init="zeros")
    return mean, log_std


def critic_head(g: Graph, spec: PolicySpec, batch: int) -> str:
    """Graph fragment ``critic_obs -> value (batch,)``."""
    critic_obs = g.input("critic_obs", (batch, spec.critic_dim))
    return g.reshape(mlp(g, critic_obs, "critic", spec.critic_sizes()), (batch,))


def gaussian_log_prob(g: Graph, mean: str, log_std: str, actions: str, action_dim: int) -> str:
    """``log N(a; mean, exp(log_std)^2)`` summed over action dimensions."""
    z = g.mul(g.sub(actions, mean), g.exp(g.scale(log_std, -1.0)))
    quad = g.scale(g.sum(g.square(z), axis=-1), -0.5)
    norm = g.add(g.scale(g.sum(log_std), -1.0), g.const(-0.5 * action_dim * LOG_2PI))
    return g.add(quad, norm)


@lru_cache(maxsize=16)
def actor_graph(spec: PolicySpec, batch: int) -> Graph:
    g = Graph("actor")
    mean, _ = actor_head(g, spec, batch)
    g.set_output(g.scale(mean, 1.0, name="mean"))
    return g.freeze()


@lru_cache(maxsize=16)
def critic_graph(spec: PolicySpec, batch: int) -> Graph:
    g = Graph("critic")
    g.set_output(g.scale(critic_head(g, spec, batch), 1.0, name="value"))
    return g.freeze()


def init_policy(spec: PolicySpec, seed: int, init_log_std: float = -0.5) -> GaussianPolicy:
    g = Graph("policy_init")
    actor_head(g, spec, 1)
    critic_head(g, spec, 1)
    params = init_params(g.freeze(), substream(seed, "ppo", "init"))
    params["log_std"] = np.full(spec.action_dim, float(init_log_std))
    return GaussianPolicy(spec, params)


def _check_obs(obs: np.ndarray, width: int, name: str) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[1] != width:
        raise ShapeError("Observation width does not match the policy", node=name, expected=("N", width), actual=obs.shape)
    return obs


def action_mean(obs: np.ndarray, policy: GaussianPolicy) -> np.ndarray:
    obs = _check_obs(obs, policy.spec.actor_dim, "obs")
    return run_graph(actor_graph(policy.spec, obs.shape[0]), {**policy.params, "obs": obs})["mean"]


def value(critic_obs: np.ndarray, policy: GaussianPolicy) -> np.ndarray:
    critic_obs = _check_obs(critic_obs, policy.spec.critic_dim, "critic_obs")
    return run_graph(critic_graph(policy.spec, critic_obs.shape[0]), {**policy.params, "critic_obs": critic_obs})["value"]


def log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * LOG_2PI


def policy_forward(
    obs: np.ndarray,
    policy: GaussianPolicy,
    mode: str = "sample",
    draw: Optional[Union[np.ndarray, np.random.Generator]] = None,
    critic_obs: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """``(action, log_prob, value)`` for a batch of actor observations.

    ``mode="mean"`` returns the Gaussian mean. In sample mode ``draw`` is either
    standard-normal noise of the action shape or a generator to draw it from.
    The value is ``None`` unless ``critic_obs`` is given.
    """
    mean = action_mean(obs, policy)
    if mode == "mean":
        action = mean
    elif mode == "sample":
        if draw is None:
            raise ShapeError("Sampling needs a noise draw or a generator", node="draw")
        noise = draw.standard_normal(mean.shape) if isinstance(draw, np.random.Generator) else np.asarray(draw)
        if noise.shape != mean.shape:
            raise ShapeError("Noise draw has the wrong shape", node="draw", expected=mean.shape, actual=noise.shape)
        action = mean + policy.std * noise
    else:
        raise ShapeError(f"Unknown policy mode '{mode}'", context={"modes": ["sample", "mean"]})
    values = None if critic_obs is None else value(critic_obs, policy)
    return action, log_prob(action, mean, policy.log_std), values


def save_policy_checkpoint(path: Union[str, Path], policy: GaussianPolicy, meta: Optional[Dict[str, Any]] = None) -> Path:
    arrays = {f"param.{k}": v for k, v in policy.params.items()}
    return write_container(path, arrays, {"spec": asdict(policy.spec), **(meta or {})}, CHECKPOINT_KIND)


def load_policy_checkpoint(path: Union[str, Path]) -> Tuple[GaussianPolicy, Dict[str, Any]]:
    arrays, meta = read_container(path, CHECKPOINT_KIND)
    spec = PolicySpec(**meta["spec"])
    params = {k[len("param.") :]: v for k, v in arrays.items() if k.startswith("param.")}
    return GaussianPolicy(spec, params), meta
