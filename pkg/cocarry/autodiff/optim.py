"""Adam optimizer and global gradient-norm clipping."""

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Tuple

import numpy as np

from cocarry.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from cocarry.exceptions import GradientError, ShapeError

Params = Dict[str, np.ndarray]


@dataclass
class AdamState:
    """First/second moments per parameter plus the shared step counter."""

    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **kwargs: float) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **kwargs,  # type: ignore[arg-type]
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> Tuple[Params, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched.

    Parameters without a gradient entry keep their value and moments.
    """
    if lr <= 0:
        raise GradientError("Learning rate must be positive", context={"lr": lr})
    for name, grad in grads.items():
        if name not in params:
            raise GradientError("Gradient for an unknown parameter", parameter=name)
        if grad.shape != params[name].shape:
            raise ShapeError(
                "Gradient shape differs from its parameter",
                node=name,
                expected=params[name].shape,
                actual=grad.shape,
            )
        if not np.all(np.isfinite(grad)):
            raise GradientError(
                "Non-finite gradient",
                parameter=name,
                suggestions=["Lower the learning rate", "Run grad_check on the graph"],
            )

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params: Params = dict(params)
    new_m: Params = dict(state.m)
    new_v: Params = dict(state.v)
    for name, grad in grads.items():
        m = b1 * state.m.get(name, np.zeros_like(grad)) + (1.0 - b1) * grad
        v = b2 * state.v.get(name, np.zeros_like(grad)) + (1.0 - b2) * grad * grad
        m_hat = m / (1.0 - b1**step)
        v_hat = v / (1.0 - b2**step)
        new_params[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, replace(state, m=new_m, v=new_v, step=step)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Params, float]:
    """Rescale all gradients together so their global L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return dict(grads), norm
    factor = max_norm / norm
    return {k: g * factor for k, g in grads.items()}, norm
