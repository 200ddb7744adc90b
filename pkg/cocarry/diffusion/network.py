"""
Noise-prediction network conditioned on wavelet wrench stacks.

Layout conventions inside the graphs:

- velocity tokens ``(B, H, 3)``, query stream ``(B, H, d)``
- conditioning stacks fed levels-first: ``(B, L, H, S, D)``
- latent keys ``(B, L, H, S, d)`` (or ``(B, L, 1, H*S, d)`` with cross-block attention)

The key encoder runs once per conditioning window; the denoiser consumes the
resulting keys, so sampling can reuse them across all steps.
"""

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from cocarry.autodiff.graph import Graph, run_graph
from cocarry.autodiff.nn import dense, init_params, layer_norm_affine, mlp, sinusoidal_embed
from cocarry.constants import BLOCK_SIZE, CHANNELS, ENTROPY_FLOOR, HORIZON, VELOCITY_DIMS
from cocarry.exceptions import ShapeError
from cocarry.seeding import substream
from cocarry.wavelet.blocks import ConditioningStack


@dataclass(frozen=True)
class EpsNetConfig:
    width: int = 128
    levels: int = 4
    blocks: int = 4
    horizon: int = HORIZON
    block_size: int = BLOCK_SIZE
    channels: int = CHANNELS
    ff_multiplier: int = 2
    cross_block_attention: bool = False
    share_level_projections: bool = True

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EpsNetConfig":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


@dataclass
class Normalizer:
    """Input scales for the wrench groups and the label standardization.

    The default is the identity, so an untrained or zero network is not shifted.
    """

    force_scale: np.ndarray = field(default_factory=lambda: np.ones(CHANNELS))
    torque_scale: np.ndarray = field(default_factory=lambda: np.ones(CHANNELS))
    label_mean: np.ndarray = field(default_factory=lambda: np.zeros(VELOCITY_DIMS))
    label_std: np.ndarray = field(default_factory=lambda: np.ones(VELOCITY_DIMS))

    @classmethod
    def fit(cls, force: np.ndarray, torque: np.ndarray, velocities: np.ndarray) -> "Normalizer":
        def spread(x: np.ndarray, axes: Tuple[int, ...]) -> np.ndarray:
            std = x.std(axis=axes)
            return np.where(std > 1e-6, std, 1.0)

        return cls(
            force_scale=spread(force, (0, 1)),
            torque_scale=spread(torque, (0, 1)),
            label_mean=velocities.mean(axis=(0, 1)),
            label_std=spread(velocities, (0, 1)),
        )

    def scale_wrench(self, force: np.ndarray, torque: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return force / self.force_scale, torque / self.torque_scale

    def encode_labels(self, velocities: np.ndarray) -> np.ndarray:
        return (velocities - self.label_mean) / self.label_std

    def decode_labels(self, y: np.ndarray) -> np.ndarray:
        return y * self.label_std + self.label_mean

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {f"normalizer.{k}": np.asarray(v, dtype=np.float64) for k, v in asdict(self).items()}

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "Normalizer":
        return cls(**{k: arrays[f"normalizer.{k}"] for k in cls.__dataclass_fields__})


@dataclass
class EpsNetParams:
    config: EpsNetConfig
    tensors: Dict[str, np.ndarray]
    normalizer: Normalizer = field(default_factory=Normalizer)

    def zeros_like(self) -> "EpsNetParams":
        return EpsNetParams(self.config, {k: np.zeros_like(v) for k, v in self.tensors.items()}, Normalizer())


class LatentKeySample(NamedTuple):
    """Per-level latent keys; ``keys == mu + exp(logvar / 2) * draw``."""

    mu: np.ndarray
    logvar: np.ndarray
    keys: np.ndarray
    draw: np.ndarray


# -- numpy reference of the attention rule ------------------------------------


def entropy_weights(attention: np.ndarray) -> np.ndarray:
    """Level weights ``w_l ∝ exp(-H(A_l))`` from row-stochastic rows ``(..., L, S)``."""
    attention = np.asarray(attention, dtype=np.float64)
    if np.any(attention < 0):
        raise ShapeError("Attention rows must be non-negative", node="entropy_weights")
    entropy = -np.sum(attention * np.log(attention + ENTROPY_FLOOR), axis=-1)
    logits = -entropy - np.max(-entropy, axis=-1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=-1, keepdims=True)


def level_attention(queries: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Per-level softmax rows ``(H, L, S)``.

    ``keys`` is ``(L, H, S, d)`` (query i sees block i) or ``(L, S, d)`` (shared).
    """
    queries = np.asarray(queries, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.float64)
    d = queries.shape[-1]
    if keys.shape[-1] != d:
        raise ShapeError("Query and key widths differ", node="level_attention", expected=(d,), actual=(keys.shape[-1],))
    if keys.ndim == 3:
        keys = np.broadcast_to(keys[:, None], (keys.shape[0], queries.shape[0]) + keys.shape[1:])
    logits = np.einsum("hd,lhsd->hls", queries, keys) / np.sqrt(d)
    logits -= logits.max(axis=-1, keepdims=True)
    rows = np.exp(logits)
    return rows / rows.sum(axis=-1, keepdims=True)


def multiscale_attention(
    queries: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Context ``(H, d)`` from level rows mixed by entropy weights (computed when omitted)."""
    rows = level_attention(queries, keys)
    if weights is None:
        weights = entropy_weights(rows)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 3:
        values = np.broadcast_to(values[:, None], (values.shape[0], rows.shape[0]) + values.shape[1:])
    per_level = np.einsum("hls,lhsd->hld", rows, values)
    return np.einsum("hl,hld->hd", weights, per_level)


def mixed_attention(queries: np.ndarray, keys: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
    rows = level_attention(queries, keys)
    if weights is None:
        weights = entropy_weights(rows)
    return np.einsum("hl,hls->hs", weights, rows)


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    """Elementwise KL of N(mu, exp(logvar)) from N(0, 1)."""
    return 0.5 * (mu**2 + np.exp(logvar) - logvar - 1.0)


def total_loss(l_diff: float, l_kl: float, kl_weight: float = 0.01) -> float:
    return l_diff + kl_weight * l_kl


# -- graph construction -------------------------------------------------------


def _key_encoder(g: Graph, cfg: EpsNetConfig, batch: int) -> Tuple[str, str]:
    d, L, H, S, D = cfg.width, cfg.levels, cfg.horizon, cfg.block_size, cfg.channels
    force = g.input("force", (batch, L, H, S, D))
    torque = g.input("torque", (batch, L, H, S, D))
    if cfg.share_level_projections:
        w_f = g.param("enc.w_force", (D, d))
        w_t = g.param("enc.w_torque", (D, d))
    else:
        w_f = g.param("enc.w_force", (L, 1, D, d))
        w_t = g.param("enc.w_torque", (L, 1, D, d))
    joined = g.concat([g.matmul(force, w_f), g.matmul(torque, w_t)], axis=-1)
    hidden = mlp(g, joined, "enc.mlp", [2 * d, d, d])
    mu = dense(g, hidden, "enc.mu", d, d)
    logvar = dense(g, hidden, "enc.logvar", d, d)
    return mu, logvar


def _block(g: Graph, cfg: EpsNetConfig, x: str, keys: str, batch: int, index: int) -> str:
    d, L, H, S = cfg.width, cfg.levels, cfg.horizon, cfg.block_size
    prefix = f"block{index}"

    h = layer_norm_affine(g, x, f"{prefix}.ln_attn", d)
    q = g.reshape(dense(g, h, f"{prefix}.q", d, d, bias=False), (batch, 1, H, 1, d))
    logits = g.scale(g.matmul(q, keys, transpose_b=True), 1.0 / np.sqrt(d))
    rows = g.softmax(logits, axis=-1)
    entropy = g.scale(g.sum(g.mul(rows, g.log(g.add(rows, g.const(ENTROPY_FLOOR)))), axis=-1), -1.0)
    weights = g.softmax(g.scale(entropy, -1.0), axis=1)
    per_level = g.matmul(rows, keys)
    mixed = g.sum(g.mul(per_level, g.reshape(weights, (batch, L, H, 1, 1))), axis=1)
    context = dense(g, g.reshape(mixed, (batch, H, d)), f"{prefix}.out", d, d)
    x = g.add(x, context)

    h = layer_norm_affine(g, x, f"{prefix}.ln_ff", d)
    return g.add(x, mlp(g, h, f"{prefix}.ff", [d, cfg.ff_multiplier * d, d]))


def _denoiser(g: Graph, cfg: EpsNetConfig, keys: str, batch: int) -> str:
    d, H = cfg.width, cfg.horizon
    y_t = g.input("y_t", (batch, H, VELOCITY_DIMS))
    t_embed = g.input("t_embed", (batch, 1, d))
    x = g.add(dense(g, y_t, "in", VELOCITY_DIMS, d), t_embed)
    if cfg.cross_block_attention:
        keys = g.reshape(keys, (batch, cfg.levels, 1, H * cfg.block_size, d))
    for i in range(cfg.blocks):
        x = _block(g, cfg, x, keys, batch, i)
    x = layer_norm_affine(g, x, "final_ln", d)
    return dense(g, x, "head", d, VELOCITY_DIMS)


def _sampled_keys(g: Graph, cfg: EpsNetConfig, mu: str, logvar: str, batch: int) -> str:
    u = g.input("u", (batch, cfg.levels, cfg.horizon, cfg.block_size, cfg.width))
    return g.add(mu, g.mul(g.exp(g.scale(logvar, 0.5)), u), name="keys")


@lru_cache(maxsize=32)
def encoder_graph(cfg: EpsNetConfig, batch: int) -> Graph:
    g = Graph("key_encoder")
    mu, logvar = _key_encoder(g, cfg, batch)
    g.scale(mu, 1.0, name="mu")
    g.scale(logvar, 1.0, name="logvar")
    g.set_output("mu")
    return g.freeze()


@lru_cache(maxsize=32)
def denoiser_graph(cfg: EpsNetConfig, batch: int) -> Graph:
    """Noise prediction from precomputed keys (fed as input ``keys``)."""
    g = Graph("denoiser")
    keys = g.input("keys", (batch, cfg.levels, cfg.horizon, cfg.block_size, cfg.width))
    g.set_output(g.scale(_denoiser(g, cfg, keys, batch), 1.0, name="eps_hat"))
    return g.freeze()


@lru_cache(maxsize=32)
def eps_graph(cfg: EpsNetConfig, batch: int) -> Graph:
    """Encoder, key sampling and denoiser in one graph."""
    g = Graph("eps_net")
    mu, logvar = _key_encoder(g, cfg, batch)
    keys = _sampled_keys(g, cfg, mu, logvar, batch)
    g.set_output(g.scale(_denoiser(g, cfg, keys, batch), 1.0, name="eps_hat"))
    return g.freeze()


@lru_cache(maxsize=32)
def loss_graph(cfg: EpsNetConfig, batch: int, kl_weight: float) -> Graph:
    """Training objective with named nodes ``l_diff``, ``l_kl`` and ``l_total``."""
    g = Graph("intent_loss")
    mu, logvar = _key_encoder(g, cfg, batch)
    keys = _sampled_keys(g, cfg, mu, logvar, batch)
    eps_hat = _denoiser(g, cfg, keys, batch)
    eps = g.input("eps", (batch, cfg.horizon, VELOCITY_DIMS))
    l_diff = g.mean(g.square(g.sub(eps_hat, eps)), name="l_diff")
    kl = g.sub(g.add(g.square(mu), g.exp(logvar)), logvar)
    l_kl = g.scale(g.mean(g.add(kl, g.const(-1.0))), 0.5, name="l_kl")
    g.set_output(g.add(l_diff, g.scale(l_kl, kl_weight), name="l_total"))
    return g.freeze()


# -- parameter handling and feeds ---------------------------------------------


def init_eps_params(cfg: EpsNetConfig, seed: int) -> EpsNetParams:
    """Fresh parameters: Xavier weights, zero biases, unit layer-norm gains."""
    tensors = init_params(eps_graph(cfg, 1), substream(seed, "intent", "init"))
    return EpsNetParams(cfg, tensors)


def levels_first(stacks: ConditioningStack, cfg: EpsNetConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Move the level axis of ``(..., H, S, L, D)`` blocks ahead of H; adds a batch axis if missing."""
    force, torque = np.asarray(stacks.force), np.asarray(stacks.torque)
    if force.ndim == 4:
        force, torque = force[None], torque[None]
    expected = (cfg.horizon, cfg.block_size, cfg.levels, cfg.channels)
    for name, arr in (("force", force), ("torque", torque)):
        if arr.ndim != 5 or arr.shape[1:] != expected:
            raise ShapeError(
                f"Conditioning stack for {name} does not match the network",
                node=name,
                expected=("B",) + expected,
                actual=arr.shape,
            )
    return np.moveaxis(force, 3, 1), np.moveaxis(torque, 3, 1)


def encode_condition(
    stacks: ConditioningStack,
    params: EpsNetParams,
    draw: Optional[np.ndarray] = None,
) -> List[LatentKeySample]:
    """Latent keys for each level; ``draw=None`` returns the means (inference mode).

    Every entry holds arrays shaped ``(B, H, S, d)``.
    """
    cfg = params.config
    force, torque = levels_first(stacks, cfg)
    batch = force.shape[0]
    trace = run_graph(encoder_graph(cfg, batch), {**params.tensors, "force": force, "torque": torque})
    mu, logvar = trace["mu"], trace["logvar"]
    u = np.zeros_like(mu) if draw is None else np.asarray(draw, dtype=np.float64).reshape(mu.shape)
    keys = mu + np.exp(logvar / 2.0) * u
    return [LatentKeySample(mu[:, l], logvar[:, l], keys[:, l], u[:, l]) for l in range(cfg.levels)]


def time_embedding(t: Any, batch: int, width: int) -> np.ndarray:
    steps = np.broadcast_to(np.asarray(t, dtype=np.float64), (batch,))
    return sinusoidal_embed(steps, width)[:, None, :]


def predict_noise_from_keys(y_t: np.ndarray, t: Any, keys: np.ndarray, params: EpsNetParams) -> np.ndarray:
    cfg = params.config
    batch = y_t.shape[0]
    feeds = {**params.tensors, "y_t": y_t, "t_embed": time_embedding(t, batch, cfg.width), "keys": keys}
    return run_graph(denoiser_graph(cfg, batch), feeds)["eps_hat"]


def predict_noise(
    y_t: np.ndarray,
    t: Any,
    stacks: ConditioningStack,
    params: EpsNetParams,
    draw: Optional[np.ndarray] = None,
) -> np.ndarray:
    """eps-hat for ``y_t`` of shape ``(H, 3)`` or ``(B, H, 3)``."""
    cfg = params.config
    y_t = np.asarray(y_t, dtype=np.float64)
    single = y_t.ndim == 2
    if single:
        y_t = y_t[None]
    if y_t.shape[1:] != (cfg.horizon, VELOCITY_DIMS):
        raise ShapeError(
            "Noisy velocity window has the wrong shape",
            node="y_t",
            expected=(cfg.horizon, VELOCITY_DIMS),
            actual=y_t.shape[1:],
        )
    force, torque = levels_first(stacks, cfg)
    batch = y_t.shape[0]
    u_shape = (batch, cfg.levels, cfg.horizon, cfg.block_size, cfg.width)
    u = np.zeros(u_shape) if draw is None else np.asarray(draw, dtype=np.float64).reshape(u_shape)
    feeds = {
        **params.tensors,
        "force": force,
        "torque": torque,
        "u": u,
        "y_t": y_t,
        "t_embed": time_embedding(t, batch, cfg.width),
    }
    eps_hat = run_graph(eps_graph(cfg, batch), feeds)["eps_hat"]
    return eps_hat[0] if single else eps_hat
