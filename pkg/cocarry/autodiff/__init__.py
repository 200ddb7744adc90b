"""Dense-tensor computational graphs with reverse-mode differentiation."""

from cocarry.autodiff.gradcheck import GradCheckReport, grad_check, numeric_gradient
from cocarry.autodiff.graph import Graph, Node, Trace, backward, eval_graph, run_graph
from cocarry.autodiff.nn import dense, init_params, layer_norm_affine, mlp, sinusoidal_embed
from cocarry.autodiff.ops import PRIMITIVES
from cocarry.autodiff.optim import AdamState, adam_step, clip_grad_norm, global_norm

__all__ = [
    "AdamState",
    "GradCheckReport",
    "Graph",
    "Node",
    "PRIMITIVES",
    "Trace",
    "adam_step",
    "backward",
    "clip_grad_norm",
    "dense",
    "eval_graph",
    "global_norm",
    "grad_check",
    "init_params",
    "layer_norm_affine",
    "mlp",
    "numeric_gradient",
    "run_graph",
    "sinusoidal_embed",
]
