"""Deterministic DDIM sampling and single-command inference."""

from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from cocarry.constants import VELOCITY_DIMS
from cocarry.diffusion.network import EpsNetParams, encode_condition, predict_noise_from_keys
from cocarry.diffusion.schedule import NoiseSchedule, ddim_timesteps
from cocarry.exceptions import ShapeError
from cocarry.seeding import substream
from cocarry.wavelet.blocks import ConditioningStack, encode_window

Denoiser = Callable[[np.ndarray, int], np.ndarray]


def keyed_denoiser(stacks: ConditioningStack, params: EpsNetParams) -> Denoiser:
    """Bind the network to one conditioning window; keys are computed once, at their means."""
    keys = np.stack([sample.keys for sample in encode_condition(stacks, params)], axis=1)

    def denoise(y_t: np.ndarray, t: int) -> np.ndarray:
        return predict_noise_from_keys(y_t, t, keys, params)

    return denoise


def ddim_trajectory(
    init: np.ndarray,
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    sample_steps: int,
) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield ``(t, y0_hat)`` after each deterministic DDIM step, starting from ``y_T = init``."""
    steps = ddim_timesteps(schedule.steps, sample_steps)
    prev_steps = np.append(steps[1:], 0)
    y = np.asarray(init, dtype=np.float64)
    for t, t_prev in zip(steps, prev_steps):
        abar, abar_prev = schedule.alpha_bars[t], schedule.alpha_bars[t_prev]
        eps = denoiser(y, int(t))
        y0_hat = (y - np.sqrt(1.0 - abar) * eps) / np.sqrt(abar)
        y = np.sqrt(abar_prev) * y0_hat + np.sqrt(1.0 - abar_prev) * eps
        yield int(t), y0_hat


def ddim_sample(
    stacks: Optional[ConditioningStack],
    params: Optional[EpsNetParams],
    schedule: NoiseSchedule,
    sample_steps: int,
    init: np.ndarray,
    denoiser: Optional[Denoiser] = None,
) -> np.ndarray:
    """Final ``y0_hat`` (normalized label space) of a ``sample_steps``-step DDIM run."""
    if denoiser is None:
        if stacks is None or params is None:
            raise ShapeError("ddim_sample needs either a denoiser or stacks and params")
        denoiser = keyed_denoiser(stacks, params)
    y0_hat = np.asarray(init, dtype=np.float64)
    for _, y0_hat in ddim_trajectory(init, denoiser, schedule, sample_steps):
        pass
    return y0_hat


def initial_draw(seed: int, batch: int, horizon: int, *names: object) -> np.ndarray:
    return substream(seed, "ddim", *names).standard_normal((batch, horizon, VELOCITY_DIMS))


def infer_velocities(
    force: np.ndarray,
    torque: np.ndarray,
    params: EpsNetParams,
    schedule: NoiseSchedule,
    sample_steps: int = 20,
    seed: int = 0,
    wavelet: str = "haar",
    init: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Full ``(B, H, 3)`` velocity windows for a batch of wrench windows ``(B, T, 6)``."""
    cfg = params.config
    force = np.asarray(force, dtype=np.float64)
    torque = np.asarray(torque, dtype=np.float64)
    window = cfg.horizon * cfg.block_size
    if force.shape[-2:] != (window, cfg.channels) or torque.shape != force.shape:
        raise ShapeError(
            "Wrench window must hold exactly H*S samples per group",
            node="wrench_window",
            expected=(window, cfg.channels),
            actual=force.shape[-2:] if force.ndim >= 2 else force.shape,
        )
    batch = force.shape[0]
    force, torque = params.normalizer.scale_wrench(force, torque)
    stacks = encode_window(force, torque, cfg.levels, cfg.horizon, cfg.block_size, wavelet)
    if init is None:
        init = initial_draw(seed, batch, cfg.horizon)
    y0_hat = ddim_sample(stacks, params, schedule, sample_steps, init)
    return params.normalizer.decode_labels(y0_hat)


def infer_command(
    force: np.ndarray,
    torque: np.ndarray,
    params: EpsNetParams,
    schedule: NoiseSchedule,
    sample_steps: int = 20,
    seed: int = 0,
    wavelet: str = "haar",
    init: Optional[np.ndarray] = None,
) -> np.ndarray:
    """First horizon token ``(v_x, v_y, omega_z)`` for one ``(T, 6)`` force/torque window."""
    force = np.asarray(force, dtype=np.float64)
    torque = np.asarray(torque, dtype=np.float64)
    if force.ndim != 2 or torque.ndim != 2:
        raise ShapeError("infer_command takes a single window", node="wrench_window", actual=force.shape)
    batch_init = None if init is None else np.asarray(init, dtype=np.float64).reshape(1, -1, VELOCITY_DIMS)
    velocities = infer_velocities(
        force[None], torque[None], params, schedule, sample_steps, seed, wavelet, batch_init
    )
    return velocities[0, 0]
