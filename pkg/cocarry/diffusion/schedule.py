"""Cosine noise schedule and the closed-form forward process."""

from dataclasses import dataclass
from typing import Union

import numpy as np

from cocarry.constants import COSINE_OFFSET, MAX_BETA
from cocarry.exceptions import ScheduleError, ShapeError

Steps = Union[int, np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    """``betas[t - 1]`` is beta_t; ``alpha_bars[t]`` is the cumulative product, ``alpha_bars[0] == 1``."""

    steps: int
    betas: np.ndarray
    alpha_bars: np.ndarray

    def alpha_bar(self, t: Steps) -> np.ndarray:
        return self.alpha_bars[np.asarray(t, dtype=np.int64)]


def cosine_schedule(steps: int, offset: float = COSINE_OFFSET, max_beta: float = MAX_BETA) -> NoiseSchedule:
    """Schedule with ``f(t) = cos^2(((t/steps + s)/(1 + s)) * pi/2)``.

    Betas are clipped at ``max_beta`` and the cumulative products are rebuilt
    from the clipped betas so both arrays always agree.
    """
    if steps < 2:
        raise ScheduleError("Diffusion step count must be at least 2", context={"steps": steps})
    t = np.arange(steps + 1, dtype=np.float64)
    f = np.cos(((t / steps + offset) / (1.0 + offset)) * np.pi / 2.0) ** 2
    ratio = f / f[0]
    betas = np.clip(1.0 - ratio[1:] / ratio[:-1], 0.0, max_beta)
    alpha_bars = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(steps, betas, alpha_bars)


def sample_steps(rng: np.random.Generator, schedule: NoiseSchedule, size: int) -> np.ndarray:
    """Training steps drawn uniformly from 1..steps."""
    return rng.integers(1, schedule.steps + 1, size=size)


def forward_diffuse(y: np.ndarray, t: Steps, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """``y_t = sqrt(abar_t) * y + sqrt(1 - abar_t) * eps``; ``t`` may be per batch row."""
    y = np.asarray(y, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if y.shape != eps.shape:
        raise ShapeError("Noise must match the clean sample", node="forward_diffuse", expected=y.shape, actual=eps.shape)
    steps = np.asarray(t, dtype=np.int64)
    if np.any(steps < 0) or np.any(steps > schedule.steps):
        raise ScheduleError("Diffusion step out of range", context={"t": t, "steps": schedule.steps})
    abar = schedule.alpha_bars[steps]
    if abar.ndim:
        abar = abar.reshape(abar.shape + (1,) * (y.ndim - abar.ndim))
    return np.sqrt(abar) * y + np.sqrt(1.0 - abar) * eps


def ddim_timesteps(steps: int, sample_steps: int) -> np.ndarray:
    """Evenly strided steps from ``steps`` down to ``steps // sample_steps``."""
    if sample_steps < 1 or sample_steps > steps:
        raise ScheduleError(
            "Sampling step count must lie in 1..diffusion steps",
            context={"sample_steps": sample_steps, "diffusion_steps": steps},
        )
    return (np.arange(sample_steps, 0, -1) * steps) // sample_steps
