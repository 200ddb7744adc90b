"""Training, evaluation and checkpointing of the intent model."""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from cocarry.autodiff.graph import backward, run_graph
from cocarry.autodiff.optim import AdamState, adam_step
from cocarry.config import IntentConfig
from cocarry.constants import PRIMITIVE_KINDS, TRANSLATION_KINDS, VELOCITY_DIMS
from cocarry.container import read_container, write_container
from cocarry.diffusion.network import EpsNetConfig, EpsNetParams, Normalizer, init_eps_params, levels_first, loss_graph, time_embedding
from cocarry.diffusion.sampler import infer_velocities
from cocarry.diffusion.schedule import NoiseSchedule, cosine_schedule, forward_diffuse, sample_steps
from cocarry.dyad.dataset import TrainingSet
from cocarry.exceptions import DivergenceError, ShapeError
from cocarry.log import get_logger
from cocarry.seeding import substream
from cocarry.types import IntentScores
from cocarry.wavelet.blocks import encode_window

logger = get_logger(__name__)

CHECKPOINT_KIND = "intent-checkpoint"
LOSS_COLUMNS = ["step", "epoch", "l_diff", "l_kl", "l_total"]


def network_config(config: IntentConfig) -> EpsNetConfig:
    return EpsNetConfig(
        width=config.width,
        levels=config.levels,
        blocks=config.blocks,
        ff_multiplier=config.ff_multiplier,
        cross_block_attention=config.cross_block_attention,
        share_level_projections=config.share_level_projections,
    )


@dataclass
class IntentBatch:
    """Clean (normalized) velocity windows plus their conditioning stacks, levels first."""

    y0: np.ndarray
    force: np.ndarray
    torque: np.ndarray


def prepare_batch(data: TrainingSet, index: np.ndarray, params: EpsNetParams, wavelet: str = "haar") -> IntentBatch:
    cfg = params.config
    force, torque = params.normalizer.scale_wrench(data.force[index], data.torque[index])
    stacks = encode_window(force, torque, cfg.levels, cfg.horizon, cfg.block_size, wavelet)
    force_lf, torque_lf = levels_first(stacks, cfg)
    return IntentBatch(params.normalizer.encode_labels(data.velocities[index]), force_lf, torque_lf)


def _loss_feeds(
    batch: IntentBatch,
    params: EpsNetParams,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> Dict[str, np.ndarray]:
    cfg = params.config
    size = batch.y0.shape[0]
    t = sample_steps(rng, schedule, size)
    eps = rng.standard_normal(batch.y0.shape)
    u = rng.standard_normal((size, cfg.levels, cfg.horizon, cfg.block_size, cfg.width))
    return {
        **params.tensors,
        "y_t": forward_diffuse(batch.y0, t, eps, schedule),
        "t_embed": time_embedding(t, size, cfg.width),
        "force": batch.force,
        "torque": batch.torque,
        "u": u,
        "eps": eps,
    }


def diffusion_loss(
    batch: IntentBatch,
    params: EpsNetParams,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    kl_weight: float = 0.01,
) -> Tuple[float, float, float]:
    """``(L_diff, L_KL, L_total)`` for one batch with freshly drawn steps, noise and latent draws."""
    if batch.y0.shape[0] == 0:
        raise ShapeError("Cannot evaluate the loss of an empty batch", node="batch")
    graph = loss_graph(params.config, batch.y0.shape[0], float(kl_weight))
    trace = run_graph(graph, _loss_feeds(batch, params, schedule, rng))
    return float(trace["l_diff"]), float(trace["l_kl"]), float(trace["l_total"])


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train_intent(
    data: TrainingSet,
    config: IntentConfig,
    seed: int,
    params: Optional[EpsNetParams] = None,
    fit_normalizer: bool = True,
    max_steps: Optional[int] = None,
    curve_path: Optional[Union[str, Path]] = None,
) -> Tuple[EpsNetParams, pd.DataFrame]:
    """Adam on ``L_total``; returns the trained parameters and the per-step loss curve."""
    if len(data) == 0:
        raise ShapeError("Training set is empty", node="dataset", suggestions=["Generate data with `cocarry gen-data`"])
    schedule = cosine_schedule(config.diffusion_steps)
    if params is None:
        params = init_eps_params(network_config(config), seed)
    if fit_normalizer:
        params.normalizer = Normalizer.fit(data.force, data.torque, data.velocities)
    state = AdamState.for_params(params.tensors)

    rows: List[Dict[str, Any]] = []
    step = 0
    last_finite = None
    for epoch in range(config.epochs):
        rng = substream(seed, "intent", "epoch", epoch)
        epoch_losses = []
        for index in _batches(len(data), config.batch_size, rng):
            batch = prepare_batch(data, index, params, config.wavelet)
            graph = loss_graph(params.config, len(index), float(config.kl_weight))
            trace = run_graph(graph, _loss_feeds(batch, params, schedule, rng))
            l_total = float(trace["l_total"])
            if not np.isfinite(l_total):
                _flush_curve(rows, curve_path)
                raise DivergenceError("Intent training diverged", step=step, last_finite_loss=last_finite)
            grads = backward(trace)
            tensors, state = adam_step(params.tensors, grads, state, config.lr)
            params = EpsNetParams(params.config, tensors, params.normalizer)
            last_finite = l_total
            rows.append(
                {"step": step, "epoch": epoch, "l_diff": float(trace["l_diff"]), "l_kl": float(trace["l_kl"]), "l_total": l_total}
            )
            epoch_losses.append(l_total)
            step += 1
            if max_steps is not None and step >= max_steps:
                break
        logger.info("epoch %d/%d  mean L_total %.5f", epoch + 1, config.epochs, float(np.mean(epoch_losses)))
        if max_steps is not None and step >= max_steps:
            break

    curve = _flush_curve(rows, curve_path)
    return params, curve


def _flush_curve(rows: List[Dict[str, Any]], path: Optional[Union[str, Path]]) -> pd.DataFrame:
    curve = pd.DataFrame(rows, columns=LOSS_COLUMNS)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        curve.to_csv(path, index=False, float_format="%.10g")
    return curve


def fixed_loss(
    data: TrainingSet,
    params: EpsNetParams,
    config: IntentConfig,
    seed: int,
) -> Tuple[float, float, float]:
    """Loss over the whole set with one fixed draw of steps and noise (comparable across checkpoints)."""
    schedule = cosine_schedule(config.diffusion_steps)
    batch = prepare_batch(data, np.arange(len(data)), params, config.wavelet)
    return diffusion_loss(batch, params, schedule, substream(seed, "intent", "fixed-loss"), config.kl_weight)


def dominant_axis_sign(velocities: np.ndarray) -> np.ndarray:
    """Signed index (+/-(axis+1)) of the largest planar component of each row."""
    planar = velocities[..., :2]
    axis = np.argmax(np.abs(planar), axis=-1)
    sign = np.sign(np.take_along_axis(planar, axis[..., None], axis=-1)[..., 0])
    return (axis + 1) * sign


def evaluate_intent(
    data: TrainingSet,
    params: EpsNetParams,
    config: IntentConfig,
    seed: int,
    batch_size: int = 64,
    moving_threshold: float = 0.05,
) -> IntentScores:
    """Held-out velocity MSE against the predict-zero baseline, and translation sign agreement.

    Agreement is measured on translation samples whose mean label speed exceeds
    ``moving_threshold`` (rest periods carry no direction).
    """
    schedule = cosine_schedule(config.diffusion_steps)
    predictions = []
    for start in range(0, len(data), batch_size):
        index = np.arange(start, min(start + batch_size, len(data)))
        predictions.append(
            infer_velocities(
                data.force[index], data.torque[index], params, schedule, config.sample_steps, seed + start, config.wavelet
            )
        )
    predicted = np.concatenate(predictions) if predictions else np.zeros((0, params.config.horizon, VELOCITY_DIMS))
    mse = float(np.mean((predicted - data.velocities) ** 2)) if len(data) else float("nan")
    baseline = float(np.mean(data.velocities**2)) if len(data) else float("nan")

    translation_ids = [PRIMITIVE_KINDS.index(k) for k in TRANSLATION_KINDS]
    label_mean = data.velocities.mean(axis=1)
    moving = np.isin(data.kind, translation_ids) & (np.linalg.norm(label_mean[:, :2], axis=-1) > moving_threshold)
    if moving.any():
        agreement = float(np.mean(dominant_axis_sign(predicted[moving, 0]) == dominant_axis_sign(label_mean[moving])))
    else:
        agreement = float("nan")
    return {
        "mse": mse,
        "baseline_mse": baseline,
        "mse_ratio": mse / baseline if baseline else float("nan"),
        "sign_agreement": agreement,
        "samples": float(len(data)),
        "moving_translation_samples": float(moving.sum()),
    }


# -- checkpoints ----------------------------------------------------------------


def save_intent_checkpoint(
    path: Union[str, Path],
    params: EpsNetParams,
    schedule: NoiseSchedule,
    config_hash: str = "",
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    arrays = {f"param.{k}": v for k, v in params.tensors.items()}
    arrays.update(params.normalizer.to_arrays())
    arrays["schedule.betas"] = schedule.betas
    arrays["schedule.alpha_bars"] = schedule.alpha_bars
    meta = {
        "network": dict(params.config.__dict__),
        "diffusion_steps": schedule.steps,
        "config_hash": config_hash,
        **(extra or {}),
    }
    return write_container(path, arrays, meta, CHECKPOINT_KIND)


def load_intent_checkpoint(path: Union[str, Path]) -> Tuple[EpsNetParams, NoiseSchedule, Dict[str, Any]]:
    arrays, meta = read_container(path, CHECKPOINT_KIND)
    tensors = {k[len("param.") :]: v for k, v in arrays.items() if k.startswith("param.")}
    params = EpsNetParams(EpsNetConfig.from_dict(meta["network"]), tensors, Normalizer.from_arrays(arrays))
    schedule = NoiseSchedule(int(meta["diffusion_steps"]), arrays["schedule.betas"], arrays["schedule.alpha_bars"])
    return params, schedule, meta
