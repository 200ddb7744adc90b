"""
Static computational graphs with reverse-mode differentiation.

A ``Graph`` is built once with the builder methods (every method returns the
new node's name), frozen on first evaluation, and then evaluated any number
of times against a mapping of named arrays holding both inputs and parameters.
"""

from dataclasses import dataclass, field
from itertools import count
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from cocarry.autodiff.ops import OPS, Shape
from cocarry.exceptions import CocarryError, GradientError, ShapeError

LEAF_KINDS = ("input", "param", "const")


@dataclass(frozen=True)
class Node:
    """One vertex of the graph; inputs always precede it in ``Graph.nodes``."""

    name: str
    op: str
    inputs: Tuple[str, ...]
    shape: Shape
    attrs: Dict[str, Any] = field(default_factory=dict)


@dataclass
class Trace:
    """Values (and backward caches) of one forward evaluation."""

    graph: "Graph"
    values: Dict[str, np.ndarray]
    caches: Dict[str, Any]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]


class Graph:
    """Builder and container for a static dataflow graph."""

    def __init__(self, name: str = "graph") -> None:
        self.name = name
        self.nodes: List[Node] = []
        self._by_name: Dict[str, Node] = {}
        self._counter = count()
        self._frozen = False
        self.output: Optional[str] = None

    # -- bookkeeping -------------------------------------------------------

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def node(self, name: str) -> Node:
        try:
            return self._by_name[name]
        except KeyError:
            raise ShapeError(f"Unknown node '{name}'", node=name) from None

    def shape(self, name: str) -> Shape:
        return self.node(name).shape

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "Graph":
        self._frozen = True
        return self

    @property
    def params(self) -> List[Node]:
        return [n for n in self.nodes if n.op == "param"]

    @property
    def inputs(self) -> List[Node]:
        return [n for n in self.nodes if n.op == "input"]

    def set_output(self, name: str) -> str:
        self.node(name)
        self.output = name
        return name

    def _add(
        self,
        op: str,
        inputs: Sequence[str],
        attrs: Optional[Dict[str, Any]] = None,
        name: Optional[str] = None,
        shape: Optional[Shape] = None,
    ) -> str:
        if self._frozen:
            raise CocarryError(
                f"Graph '{self.name}' is frozen",
                suggestions=["Build a new graph instead of extending an evaluated one"],
            )
        name = name or f"{op}_{next(self._counter)}"
        if name in self._by_name:
            raise ShapeError(f"Duplicate node name '{name}'", node=name)
        attrs = dict(attrs or {})
        if shape is None:
            kernel = OPS[op]
            if kernel.arity > 0 and len(inputs) != kernel.arity:
                raise ShapeError(
                    f"{op} takes {kernel.arity} operand(s), got {len(inputs)}", node=name
                )
            shape = kernel.infer_shape(name, [self.shape(i) for i in inputs], attrs)
        node = Node(name, op, tuple(inputs), tuple(int(s) for s in shape), attrs)
        self.nodes.append(node)
        self._by_name[name] = node
        return name

    # -- leaves ------------------------------------------------------------

    def input(self, name: str, shape: Sequence[int]) -> str:
        return self._add("input", (), name=name, shape=tuple(shape))

    def param(self, name: str, shape: Sequence[int], init: str = "xavier") -> str:
        """Declare a trainable leaf; ``init`` is one of xavier, zeros, ones, normal."""
        return self._add("param", (), {"init": init}, name=name, shape=tuple(shape))

    def const(self, value: Any, name: Optional[str] = None) -> str:
        array = np.array(value, dtype=np.float64)
        return self._add("const", (), {"value": array}, name=name, shape=array.shape)

    # -- catalog primitives ------------------------------------------------

    def matmul(self, a: str, b: str, transpose_b: bool = False, name: Optional[str] = None) -> str:
        return self._add("matmul", (a, b), {"transpose_b": transpose_b}, name)

    def add(self, a: str, b: str, name: Optional[str] = None) -> str:
        return self._add("add", (a, b), name=name)

    def mul(self, a: str, b: str, name: Optional[str] = None) -> str:
        return self._add("mul", (a, b), name=name)

    def concat(self, items: Sequence[str], axis: int = -1, name: Optional[str] = None) -> str:
        return self._add("concat", tuple(items), {"axis": axis}, name)

    def softmax(self, x: str, axis: int = -1, name: Optional[str] = None) -> str:
        return self._add("softmax", (x,), {"axis": axis}, name)

    def layer_norm(self, x: str, eps: Optional[float] = None, name: Optional[str] = None) -> str:
        attrs = {} if eps is None else {"eps": eps}
        return self._add("layer_norm", (x,), attrs, name)

    def gelu(self, x: str, name: Optional[str] = None) -> str:
        return self._add("gelu", (x,), name=name)

    def exp(self, x: str, name: Optional[str] = None) -> str:
        return self._add("exp", (x,), name=name)

    def log(self, x: str, name: Optional[str] = None) -> str:
        return self._add("log", (x,), name=name)

    def sum(self, x: str, axis: Any = None, keepdims: bool = False, name: Optional[str] = None) -> str:
        return self._add("sum", (x,), {"axis": axis, "keepdims": keepdims}, name)

    def mean(self, x: str, axis: Any = None, keepdims: bool = False, name: Optional[str] = None) -> str:
        return self._add("mean", (x,), {"axis": axis, "keepdims": keepdims}, name)

    def scale(self, x: str, factor: float, name: Optional[str] = None) -> str:
        return self._add("scale", (x,), {"factor": float(factor)}, name)

    def reshape(self, x: str, shape: Sequence[int], name: Optional[str] = None) -> str:
        return self._add("reshape", (x,), {"shape": tuple(shape)}, name)

    def slice(self, x: str, axis: int, start: int, stop: int, name: Optional[str] = None) -> str:
        return self._add("slice", (x,), {"axis": axis, "start": start, "stop": stop}, name)

    # -- composites (catalog primitives only) --------------------------------

    def sub(self, a: str, b: str, name: Optional[str] = None) -> str:
        return self.add(a, self.scale(b, -1.0), name=name)

    def square(self, x: str, name: Optional[str] = None) -> str:
        return self.mul(x, x, name=name)

    def linear(self, x: str, weight: str, bias: Optional[str] = None, name: Optional[str] = None) -> str:
        out = self.matmul(x, weight, name=None if bias else name)
        return self.add(out, bias, name=name) if bias else out


def run_graph(graph: Graph, feeds: Mapping[str, Any]) -> Trace:
    """Evaluate every node in topological order and keep all values."""
    graph.freeze()
    values: Dict[str, np.ndarray] = {}
    caches: Dict[str, Any] = {}
    for node in graph.nodes:
        if node.op == "const":
            values[node.name] = node.attrs["value"]
            continue
        if node.op in ("input", "param"):
            if node.name not in feeds:
                raise ShapeError(
                    f"No value supplied for {node.op} '{node.name}'",
                    node=node.name,
                    expected=node.shape,
                )
            value = np.asarray(feeds[node.name], dtype=np.float64)
            if value.shape != node.shape:
                raise ShapeError(
                    f"Fed value for '{node.name}' has the wrong shape",
                    node=node.name,
                    expected=node.shape,
                    actual=value.shape,
                )
            values[node.name] = value
            continue
        args = [values[i] for i in node.inputs]
        out, cache = OPS[node.op].forward(args, node.attrs)
        values[node.name] = np.asarray(out, dtype=np.float64)
        caches[node.name] = cache
    return Trace(graph, values, caches)


def eval_graph(graph: Graph, feeds: Mapping[str, Any], output: Optional[str] = None) -> np.ndarray:
    """Forward value of ``output`` (default: the graph's declared output)."""
    name = output or graph.output
    if name is None:
        raise ShapeError(f"Graph '{graph.name}' has no output node")
    return run_graph(graph, feeds)[name]


def backward(trace: Trace, output: Optional[str] = None) -> Dict[str, np.ndarray]:
    """Gradients of a scalar node with respect to every parameter leaf.

    Parameters the output does not depend on receive zero gradients.
    """
    graph = trace.graph
    name = output or graph.output
    if name is None:
        raise GradientError(f"Graph '{graph.name}' has no output node")
    out_node = graph.node(name)
    if int(np.prod(out_node.shape)) != 1:
        raise GradientError(
            "backward needs a scalar output",
            context={"node": name, "shape": out_node.shape},
            suggestions=["Reduce the output with sum or mean first"],
        )

    grads: Dict[str, np.ndarray] = {name: np.ones(out_node.shape)}
    position = {node.name: i for i, node in enumerate(graph.nodes)}
    for node in reversed(graph.nodes[: position[name] + 1]):
        grad = grads.get(node.name)
        if grad is None or node.op in LEAF_KINDS:
            continue
        args = [trace.values[i] for i in node.inputs]
        parts = OPS[node.op].backward(grad, args, trace.values[node.name], trace.caches[node.name], node.attrs)
        for parent, part in zip(node.inputs, parts):
            if part is None:
                continue
            grads[parent] = grads[parent] + part if parent in grads else part

    result: Dict[str, np.ndarray] = {}
    for param in graph.params:
        result[param.name] = np.array(grads.get(param.name, np.zeros(param.shape)), dtype=np.float64)
    return result
