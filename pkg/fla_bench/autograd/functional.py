"""Tape-recording versions of the tensor primitives with their backward rules."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import ops
from ..core.ops import ordered_matmul, ordered_sum
from ..core.tensor import Tensor
from ..exceptions import DimensionError
from .tape import Node, Var, register_backward


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def matmul(a: Var, b: Var) -> Var:
    return a.tape.record("matmul", (a, b), ops.matmul(a.value, b.value))


@register_backward("matmul")
def _matmul_backward(node: Node, inputs, grad):
    a, b = inputs
    return ordered_matmul(grad, _swap(b)), ordered_matmul(_swap(a), grad)


def softmax(x: Var, axis: int = -1) -> Var:
    axis = axis % x.value.rank
    return x.tape.record("softmax", (x,), ops.softmax(x.value, axis), axis=axis)


@register_backward("softmax")
def _softmax_backward(node: Node, inputs, grad):
    # y * (g - <g, y>) along the normalized axis
    y = node.value.array
    inner = ordered_sum(grad * y, node.ctx["axis"])
    return (y * (grad - inner),)


def avg_pool_rows(x: Var) -> Var:
    return x.tape.record("avg_pool_rows", (x,), ops.avg_pool_rows(x.value))


@register_backward("avg_pool_rows")
def _avg_pool_rows_backward(node: Node, inputs, grad):
    (x,) = inputs
    return (np.broadcast_to(grad / x.shape[1], x.shape).copy(),)


def avg_pool_cols(x: Var) -> Var:
    return x.tape.record("avg_pool_cols", (x,), ops.avg_pool_cols(x.value))


@register_backward("avg_pool_cols")
def _avg_pool_cols_backward(node: Node, inputs, grad):
    (x,) = inputs
    return (np.broadcast_to(grad / x.shape[2], x.shape).copy(),)


def slice_stack_h(x: Var) -> Var:
    return x.tape.record("slice_stack_h", (x,), ops.slice_stack_h(x.value))


def unstack_h(x: Var) -> Var:
    return x.tape.record("unstack_h", (x,), ops.unstack_h(x.value))


def slice_stack_w(x: Var) -> Var:
    return x.tape.record("slice_stack_w", (x,), ops.slice_stack_w(x.value))


def unstack_w(x: Var) -> Var:
    return x.tape.record("unstack_w", (x,), ops.unstack_w(x.value))


@register_backward("slice_stack_h")
@register_backward("unstack_h")
def _swap_hc_backward(node: Node, inputs, grad):
    return (np.ascontiguousarray(grad.transpose(1, 0, 2)),)


@register_backward("slice_stack_w")
def _slice_stack_w_backward(node: Node, inputs, grad):
    # grad is W x C x H
    return (np.ascontiguousarray(grad.transpose(1, 2, 0)),)


@register_backward("unstack_w")
def _unstack_w_backward(node: Node, inputs, grad):
    # grad is C x H x W
    return (np.ascontiguousarray(grad.transpose(2, 0, 1)),)


def concat(parts: Sequence[Var], axis: int = 0) -> Var:
    value = ops.concat([p.value for p in parts], axis)
    axis = axis % value.rank
    sizes = tuple(p.value.shape[axis] for p in parts)
    return parts[0].tape.record("concat", parts, value, axis=axis, sizes=sizes)


@register_backward("concat")
def _concat_backward(node: Node, inputs, grad):
    bounds = np.cumsum(node.ctx["sizes"])[:-1]
    return tuple(np.split(grad, bounds, axis=node.ctx["axis"]))


def take(x: Var, start: int, stop: int, axis: int = 0) -> Var:
    value = ops.take(x.value, start, stop, axis)
    return x.tape.record(
        "take", (x,), value, start=start, stop=stop, axis=axis % x.value.rank
    )


@register_backward("take")
def _take_backward(node: Node, inputs, grad):
    (x,) = inputs
    full = np.zeros(x.shape)
    index = [slice(None)] * x.ndim
    index[node.ctx["axis"]] = slice(node.ctx["start"], node.ctx["stop"])
    full[tuple(index)] = grad
    return (full,)


def split(x: Var, sizes: Sequence[int], axis: int = 0) -> list[Var]:
    if sum(sizes) != x.value.shape[axis]:
        raise DimensionError(
            f"split: sizes {list(sizes)} do not add up to extent {x.value.shape[axis]}"
        )
    parts, start = [], 0
    for size in sizes:
        parts.append(take(x, start, start + size, axis))
        start += size
    return parts


def add(a: Var, b: Var) -> Var:
    return a.tape.record("add", (a, b), ops.add(a.value, b.value))


@register_backward("add")
def _add_backward(node: Node, inputs, grad):
    return grad, grad


def sub(a: Var, b: Var) -> Var:
    return a.tape.record("sub", (a, b), ops.sub(a.value, b.value))


@register_backward("sub")
def _sub_backward(node: Node, inputs, grad):
    return grad, -grad


def mul(a: Var, b: Var) -> Var:
    return a.tape.record("mul", (a, b), ops.mul(a.value, b.value))


@register_backward("mul")
def _mul_backward(node: Node, inputs, grad):
    a, b = inputs
    return grad * b, grad * a


def scale(x: Var, factor: float) -> Var:
    return x.tape.record(
        "scale", (x,), ops.scale(x.value, factor), factor=float(factor)
    )


@register_backward("scale")
def _scale_backward(node: Node, inputs, grad):
    return (grad * node.ctx["factor"],)


def scale_by(x: Var, gamma: Var) -> Var:
    """x times a learnable single-element scale."""
    if gamma.value.size != 1:
        raise DimensionError(
            "scale_by expects a single-element scale", {"shape": gamma.shape}
        )
    return x.tape.record("scale_by", (x, gamma), ops.scale(x.value, gamma.value.item()))


@register_backward("scale_by")
def _scale_by_backward(node: Node, inputs, grad):
    x, gamma = inputs
    return grad * gamma.reshape(-1)[0], ordered_sum((grad * x).reshape(-1), 0)


def linear_channels(x: Var, w: Var, b: Var) -> Var:
    return x.tape.record(
        "linear_channels", (x, w, b), ops.linear_channels(x.value, w.value, b.value)
    )


@register_backward("linear_channels")
def _linear_channels_backward(node: Node, inputs, grad):
    x, w, _ = inputs
    flat_x = x.reshape(x.shape[0], -1)
    flat_g = grad.reshape(grad.shape[0], -1)
    gx = ordered_matmul(w.T, flat_g).reshape(x.shape)
    gw = ordered_matmul(flat_g, flat_x.T)
    gb = ordered_sum(flat_g, 1).reshape(-1)
    return gx, gw, gb


def transpose_last(x: Var) -> Var:
    return x.tape.record("transpose_last", (x,), ops.transpose_last(x.value))


@register_backward("transpose_last")
def _transpose_last_backward(node: Node, inputs, grad):
    return (np.ascontiguousarray(_swap(grad)),)


def reshape(x: Var, shape: Sequence[int]) -> Var:
    return x.tape.record("reshape", (x,), ops.reshape(x.value, shape))


@register_backward("reshape")
def _reshape_backward(node: Node, inputs, grad):
    (x,) = inputs
    return (grad.reshape(x.shape),)


def tile_batch(x: Var, n: int) -> Var:
    return x.tape.record("tile_batch", (x,), ops.tile_batch(x.value, n))


@register_backward("tile_batch")
def _tile_batch_backward(node: Node, inputs, grad):
    return (ordered_sum(grad, 0)[0],)


def sum_all(x: Var) -> Var:
    return x.tape.record("sum_all", (x,), ops.sum_all(x.value))


@register_backward("sum_all")
def _sum_all_backward(node: Node, inputs, grad):
    (x,) = inputs
    return (np.full(x.shape, grad.reshape(-1)[0]),)


def sum_squares(x: Var) -> Var:
    return x.tape.record("sum_squares", (x,), ops.sum_squares(x.value))


@register_backward("sum_squares")
def _sum_squares_backward(node: Node, inputs, grad):
    (x,) = inputs
    return (2.0 * x * grad.reshape(-1)[0],)


def mse(x: Var, target: Tensor) -> Var:
    """Mean squared error against a constant target."""
    if x.value.shape != target.shape:
        raise DimensionError(
            f"mse: output {list(x.value.shape)} vs target {list(target.shape)}"
        )
    diff = (x.value.array - target.array).reshape(-1)
    value = Tensor._adopt(ordered_sum(diff * diff, 0) / diff.size, op="mse")
    return x.tape.record("mse", (x,), value, target=target)


@register_backward("mse")
def _mse_backward(node: Node, inputs, grad):
    (x,) = inputs
    target = node.ctx["target"].array
    return (2.0 * (x - target) / x.size * grad.reshape(-1)[0],)
