"""Conditional diffusion model of the follower's velocity intent."""

from cocarry.diffusion.network import (
    EpsNetConfig,
    EpsNetParams,
    LatentKeySample,
    Normalizer,
    encode_condition,
    entropy_weights,
    init_eps_params,
    kl_divergence,
    level_attention,
    loss_graph,
    mixed_attention,
    multiscale_attention,
    predict_noise,
    total_loss,
)
from cocarry.diffusion.sampler import ddim_sample, ddim_trajectory, infer_command, infer_velocities
from cocarry.diffusion.schedule import NoiseSchedule, cosine_schedule, ddim_timesteps, forward_diffuse, sample_steps
from cocarry.diffusion.training import (
    diffusion_loss,
    evaluate_intent,
    fixed_loss,
    load_intent_checkpoint,
    network_config,
    prepare_batch,
    save_intent_checkpoint,
    train_intent,
)

__all__ = [
    "EpsNetConfig",
    "EpsNetParams",
    "LatentKeySample",
    "NoiseSchedule",
    "Normalizer",
    "cosine_schedule",
    "ddim_sample",
    "ddim_timesteps",
    "ddim_trajectory",
    "diffusion_loss",
    "encode_condition",
    "entropy_weights",
    "evaluate_intent",
    "fixed_loss",
    "forward_diffuse",
    "infer_command",
    "infer_velocities",
    "init_eps_params",
    "kl_divergence",
    "level_attention",
    "load_intent_checkpoint",
    "loss_graph",
    "mixed_attention",
    "multiscale_attention",
    "network_config",
    "predict_noise",
    "prepare_batch",
    "sample_steps",
    "save_intent_checkpoint",
    "total_loss",
    "train_intent",
]
