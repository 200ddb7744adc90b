"""Layer helpers, parameter initialization and the sinusoidal time embedding."""

from typing import Dict, List, Sequence, Union

import numpy as np

from cocarry.autodiff.graph import Graph
from cocarry.constants import TIME_EMBED_BASE
from cocarry.exceptions import ShapeError

ArrayLike = Union[int, float, Sequence[float], np.ndarray]


def sinusoidal_embed(t: ArrayLike, d: int) -> np.ndarray:
    """Embed diffusion step(s) ``t`` as ``[sin(t*w_0..w_{d/2-1}), cos(...)]``.

    Frequencies fall geometrically from 1 to 1/10000. Scalar ``t`` gives shape
    ``(d,)``; an array of steps gives ``(..., d)``.
    """
    if d <= 0 or d % 2:
        raise ShapeError("Embedding width must be a positive even number", actual=(d,))
    steps = np.asarray(t, dtype=np.float64)
    if np.any(steps < 0):
        raise ShapeError("Diffusion step must be non-negative", actual=steps.shape)
    half = d // 2
    if half == 1:
        freqs = np.ones(1)
    else:
        freqs = TIME_EMBED_BASE ** (-np.arange(half) / (half - 1))
    angles = steps[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def dense(graph: Graph, x: str, prefix: str, n_in: int, n_out: int, bias: bool = True) -> str:
    """Affine layer ``x @ W + b`` registering ``{prefix}.w`` and ``{prefix}.b``."""
    weight = graph.param(f"{prefix}.w", (n_in, n_out), init="xavier")
    if not bias:
        return graph.matmul(x, weight)
    b = graph.param(f"{prefix}.b", (n_out,), init="zeros")
    return graph.linear(x, weight, b)


def mlp(graph: Graph, x: str, prefix: str, sizes: Sequence[int]) -> str:
    """Stack of dense layers with GELU between them (none after the last)."""
    out = x
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        out = dense(graph, out, f"{prefix}.{i}", n_in, n_out)
        if i < len(sizes) - 2:
            out = graph.gelu(out)
    return out


def layer_norm_affine(graph: Graph, x: str, prefix: str, width: int) -> str:
    """Layer normalization followed by a learned gain and bias."""
    gain = graph.param(f"{prefix}.gain", (width,), init="ones")
    bias = graph.param(f"{prefix}.bias", (width,), init="zeros")
    return graph.add(graph.mul(graph.layer_norm(x), gain), bias)


def init_params(graph: Graph, rng: np.random.Generator, gain: float = 1.0) -> Dict[str, np.ndarray]:
    """Draw initial values for every parameter leaf from its declared scheme."""
    params: Dict[str, np.ndarray] = {}
    for node in graph.params:
        shape = node.shape
        scheme = node.attrs.get("init", "xavier")
        if scheme == "zeros":
            params[node.name] = np.zeros(shape)
        elif scheme == "ones":
            params[node.name] = np.ones(shape)
        elif scheme == "normal":
            params[node.name] = rng.normal(0.0, 0.02 * gain, size=shape)
        else:
            fan_in = shape[-2] if len(shape) >= 2 else shape[0]
            fan_out = shape[-1]
            limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
            params[node.name] = rng.uniform(-limit, limit, size=shape)
    return params


def param_names(graph: Graph) -> List[str]:
    return [p.name for p in graph.params]
