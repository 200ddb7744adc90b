"""
Primitive operation catalog.

Each primitive knows its static shape rule, its forward value and its
vector-Jacobian product. The catalog is closed: model code composes these
and nothing else.
"""

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erf

from cocarry.constants import LAYER_NORM_EPS
from cocarry.exceptions import ShapeError

Shape = Tuple[int, ...]

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def unbroadcast(grad: np.ndarray, shape: Shape) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _normalize_axes(axis: Any, ndim: int) -> Optional[Tuple[int, ...]]:
    if axis is None:
        return None
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(sorted(a % ndim for a in axes))


def _broadcast(node: str, a: Shape, b: Shape) -> Shape:
    try:
        return tuple(np.broadcast_shapes(a, b))
    except ValueError:
        raise ShapeError(
            "Operands cannot be broadcast together",
            node=node,
            expected=a,
            actual=b,
        ) from None


class Op:
    """One primitive of the catalog."""

    name = ""
    arity = 1

    def infer_shape(self, node: str, shapes: Sequence[Shape], attrs: Dict[str, Any]) -> Shape:
        return shapes[0]

    def forward(self, args: Sequence[np.ndarray], attrs: Dict[str, Any]) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(
        self,
        grad: np.ndarray,
        args: Sequence[np.ndarray],
        out: np.ndarray,
        cache: Any,
        attrs: Dict[str, Any],
    ) -> List[Optional[np.ndarray]]:
        raise NotImplementedError


OPS: Dict[str, Op] = {}


def register(cls: Callable[[], Op]) -> Callable[[], Op]:
    op = cls()
    OPS[op.name] = op
    return cls


@register
class MatMul(Op):
    name = "matmul"
    arity = 2

    def infer_shape(self, node, shapes, attrs):
        a, b = shapes
        if len(a) < 2 or len(b) < 2:
            raise ShapeError("matmul needs operands of rank >= 2", node=node, expected=a, actual=b)
        if attrs.get("transpose_b"):
            b = b[:-2] + (b[-1], b[-2])
        if a[-1] != b[-2]:
            raise ShapeError(
                f"matmul inner dimensions differ ({a[-1]} vs {b[-2]})",
                node=node,
                expected=a[:-1] + (b[-2],),
                actual=a,
            )
        batch = _broadcast(node, a[:-2], b[:-2])
        return batch + (a[-2], b[-1])

    def forward(self, args, attrs):
        a, b = args
        if attrs.get("transpose_b"):
            b = np.swapaxes(b, -1, -2)
        return np.matmul(a, b), None

    def backward(self, grad, args, out, cache, attrs):
        a, b = args
        transpose_b = attrs.get("transpose_b", False)
        b_eff = np.swapaxes(b, -1, -2) if transpose_b else b
        grad_a = np.matmul(grad, np.swapaxes(b_eff, -1, -2))
        grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        if transpose_b:
            grad_b = np.swapaxes(grad_b, -1, -2)
        return [unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)]


@register
class Add(Op):
    name = "add"
    arity = 2

    def infer_shape(self, node, shapes, attrs):
        return _broadcast(node, shapes[0], shapes[1])

    def forward(self, args, attrs):
        return args[0] + args[1], None

    def backward(self, grad, args, out, cache, attrs):
        return [unbroadcast(grad, args[0].shape), unbroadcast(grad, args[1].shape)]


@register
class Mul(Op):
    name = "mul"
    arity = 2

    def infer_shape(self, node, shapes, attrs):
        return _broadcast(node, shapes[0], shapes[1])

    def forward(self, args, attrs):
        return args[0] * args[1], None

    def backward(self, grad, args, out, cache, attrs):
        a, b = args
        return [unbroadcast(grad * b, a.shape), unbroadcast(grad * a, b.shape)]


@register
class Concat(Op):
    name = "concat"
    arity = -1

    def infer_shape(self, node, shapes, attrs):
        ndim = len(shapes[0])
        axis = attrs["axis"] % ndim
        total = 0
        for shape in shapes:
            expected = shapes[0][:axis] + (shape[axis],) + shapes[0][axis + 1 :]
            if len(shape) != ndim or shape != expected:
                raise ShapeError(
                    f"concat operands must agree off axis {axis}",
                    node=node,
                    expected=expected,
                    actual=shape,
                )
            total += shape[axis]
        return shapes[0][:axis] + (total,) + shapes[0][axis + 1 :]

    def forward(self, args, attrs):
        return np.concatenate(args, axis=attrs["axis"]), None

    def backward(self, grad, args, out, cache, attrs):
        splits = np.cumsum([arg.shape[attrs["axis"]] for arg in args])[:-1]
        return list(np.split(grad, splits, axis=attrs["axis"]))


@register
class Softmax(Op):
    name = "softmax"

    def forward(self, args, attrs):
        axis = attrs.get("axis", -1)
        shifted = args[0] - np.max(args[0], axis=axis, keepdims=True)
        e = np.exp(shifted)
        return e / np.sum(e, axis=axis, keepdims=True), None

    def backward(self, grad, args, out, cache, attrs):
        axis = attrs.get("axis", -1)
        return [out * (grad - np.sum(grad * out, axis=axis, keepdims=True))]


@register
class LayerNorm(Op):
    """Normalize the last axis to zero mean and unit variance (no affine part)."""

    name = "layer_norm"

    def forward(self, args, attrs):
        x = args[0]
        eps = attrs.get("eps", LAYER_NORM_EPS)
        centered = x - x.mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
        return centered * inv_std, inv_std

    def backward(self, grad, args, out, cache, attrs):
        inv_std = cache
        mean_grad = grad.mean(axis=-1, keepdims=True)
        mean_grad_out = (grad * out).mean(axis=-1, keepdims=True)
        return [inv_std * (grad - mean_grad - out * mean_grad_out)]


@register
class Gelu(Op):
    """Exact GELU, x * Phi(x)."""

    name = "gelu"

    def forward(self, args, attrs):
        x = args[0]
        cdf = 0.5 * (1.0 + erf(x / _SQRT2))
        return x * cdf, cdf

    def backward(self, grad, args, out, cache, attrs):
        x = args[0]
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return [grad * (cache + x * pdf)]


@register
class Exp(Op):
    name = "exp"

    def forward(self, args, attrs):
        return np.exp(args[0]), None

    def backward(self, grad, args, out, cache, attrs):
        return [grad * out]


@register
class Log(Op):
    name = "log"

    def forward(self, args, attrs):
        return np.log(args[0]), None

    def backward(self, grad, args, out, cache, attrs):
        return [grad / args[0]]


class _Reduce(Op):
    def infer_shape(self, node, shapes, attrs):
        shape = shapes[0]
        axes = _normalize_axes(attrs.get("axis"), max(len(shape), 1))
        keepdims = attrs.get("keepdims", False)
        if axes is None:
            return tuple(1 for _ in shape) if keepdims else ()
        if keepdims:
            return tuple(1 if i in axes else n for i, n in enumerate(shape))
        return tuple(n for i, n in enumerate(shape) if i not in axes)

    def _expand(self, grad: np.ndarray, x: np.ndarray, attrs: Dict[str, Any]) -> np.ndarray:
        axes = _normalize_axes(attrs.get("axis"), x.ndim)
        if axes is None:
            axes = tuple(range(x.ndim))
        if not attrs.get("keepdims", False):
            grad = np.expand_dims(grad, axes)
        return np.broadcast_to(grad, x.shape)

    def _count(self, x: np.ndarray, attrs: Dict[str, Any]) -> int:
        axes = _normalize_axes(attrs.get("axis"), x.ndim)
        if axes is None:
            return int(x.size)
        return int(np.prod([x.shape[a] for a in axes]))


@register
class Sum(_Reduce):
    name = "sum"

    def forward(self, args, attrs):
        axis = attrs.get("axis")
        axis = tuple(axis) if isinstance(axis, (list, tuple)) else axis
        return np.sum(args[0], axis=axis, keepdims=attrs.get("keepdims", False)), None

    def backward(self, grad, args, out, cache, attrs):
        return [np.array(self._expand(grad, args[0], attrs))]


@register
class Mean(_Reduce):
    name = "mean"

    def forward(self, args, attrs):
        axis = attrs.get("axis")
        axis = tuple(axis) if isinstance(axis, (list, tuple)) else axis
        return np.mean(args[0], axis=axis, keepdims=attrs.get("keepdims", False)), None

    def backward(self, grad, args, out, cache, attrs):
        return [self._expand(grad, args[0], attrs) / self._count(args[0], attrs)]


@register
class Scale(Op):
    name = "scale"

    def forward(self, args, attrs):
        return args[0] * attrs["factor"], None

    def backward(self, grad, args, out, cache, attrs):
        return [grad * attrs["factor"]]


@register
class Reshape(Op):
    name = "reshape"

    def infer_shape(self, node, shapes, attrs):
        try:
            return tuple(np.empty(shapes[0], dtype=np.uint8).reshape(attrs["shape"]).shape)
        except ValueError:
            raise ShapeError(
                "reshape changes the element count",
                node=node,
                expected=shapes[0],
                actual=tuple(attrs["shape"]),
            ) from None

    def forward(self, args, attrs):
        return args[0].reshape(attrs["shape"]), None

    def backward(self, grad, args, out, cache, attrs):
        return [grad.reshape(args[0].shape)]


@register
class Slice(Op):
    name = "slice"

    def infer_shape(self, node, shapes, attrs):
        shape = shapes[0]
        axis = attrs["axis"] % len(shape)
        start, stop = attrs["start"], attrs["stop"]
        if not 0 <= start < stop <= shape[axis]:
            raise ShapeError(
                f"slice [{start}:{stop}] out of range on axis {axis}",
                node=node,
                expected=shape,
                actual=(start, stop),
            )
        return shape[:axis] + (stop - start,) + shape[axis + 1 :]

    def _index(self, ndim: int, attrs: Dict[str, Any]) -> Tuple[slice, ...]:
        index = [slice(None)] * ndim
        index[attrs["axis"] % ndim] = slice(attrs["start"], attrs["stop"])
        return tuple(index)

    def forward(self, args, attrs):
        return args[0][self._index(args[0].ndim, attrs)], None

    def backward(self, grad, args, out, cache, attrs):
        full = np.zeros_like(args[0])
        full[self._index(args[0].ndim, attrs)] = grad
        return [full]


PRIMITIVES = tuple(OPS)
