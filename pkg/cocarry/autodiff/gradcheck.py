"""Finite-difference verification of ``backward``."""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from cocarry.autodiff.graph import Graph, backward, run_graph


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    tol: float
    per_param: Dict[str, float] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from dominating."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def numeric_gradient(
    graph: Graph,
    feeds: Mapping[str, np.ndarray],
    param: str,
    output: Optional[str] = None,
    step: float = 1e-5,
) -> np.ndarray:
    """Central differences of the scalar output with respect to one leaf."""
    name = output or graph.output
    base = {k: np.array(v, dtype=np.float64) for k, v in feeds.items()}
    value = base[param]
    grad = np.zeros_like(value)
    for index in np.ndindex(value.shape):
        original = value[index]
        value[index] = original + step
        plus = float(np.sum(run_graph(graph, base)[name]))
        value[index] = original - step
        minus = float(np.sum(run_graph(graph, base)[name]))
        value[index] = original
        grad[index] = (plus - minus) / (2.0 * step)
    return grad


def grad_check(
    graph: Graph,
    feeds: Mapping[str, np.ndarray],
    params: Optional[Sequence[str]] = None,
    output: Optional[str] = None,
    tol: float = 1e-4,
    step: float = 1e-5,
    floor: float = 1e-3,
) -> GradCheckReport:
    """Compare ``backward`` with central differences for every (or the named) parameter."""
    analytic = backward(run_graph(graph, feeds), output)
    names = list(params) if params is not None else [p.name for p in graph.params]
    report = GradCheckReport(passed=True, max_rel_error=0.0, tol=tol)
    for name in names:
        numeric = numeric_gradient(graph, feeds, name, output, step)
        err = float(np.max(relative_error(analytic[name], numeric, floor), initial=0.0))
        report.per_param[name] = err
        report.max_rel_error = max(report.max_rel_error, err)
        if not err < tol:
            report.passed = False
            report.failures.append(f"{name}: max relative error {err:.3e} >= {tol:.1e}")
    return report
