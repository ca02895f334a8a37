"""Pure tensor primitives used by the attention blocks.

Every reduction accumulates leftmost-first, so results are bit-stable for a given
input regardless of how operands are batched together.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..exceptions import DimensionError
from .tensor import Tensor


def ordered_sum(array: np.ndarray, axis: int) -> np.ndarray:
    """Sequential left-to-right sum along ``axis``, keeping the reduced axis."""
    axis = axis % array.ndim
    accumulated = np.add.accumulate(array, axis=axis)
    return np.take(accumulated, [-1], axis=axis)


def ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(..., M, K) x (..., K, N) with the inner sum taken in index order."""
    out = a[..., :, 0:1] * b[..., 0:1, :]
    for k in range(1, a.shape[-1]):
        out += a[..., :, k : k + 1] * b[..., k : k + 1, :]
    return out


def _require_rank(x: Tensor, rank: int, op: str) -> None:
    if x.rank != rank:
        raise DimensionError(
            f"{op} expects a rank-{rank} tensor, got shape {list(x.shape)}",
            {"op": op, "shape": x.shape},
        )


def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(
            f"{op}: shapes {list(a.shape)} and {list(b.shape)} differ",
            {"op": op, "left": a.shape, "right": b.shape},
        )


def _normalize_axis(x: Tensor, axis: int, op: str) -> int:
    if not -x.rank <= axis < x.rank:
        raise DimensionError(
            f"{op}: axis {axis} out of range for rank {x.rank}",
            {"op": op, "axis": axis, "rank": x.rank},
        )
    return axis % x.rank


def matmul_batched(a: Tensor, b: Tensor) -> Tensor:
    _require_rank(a, 3, "matmul_batched")
    _require_rank(b, 3, "matmul_batched")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(
            f"matmul_batched: batch axis 0 differs ({a.shape[0]} vs {b.shape[0]})",
            {"axes": ("a[0]", "b[0]"), "left": a.shape, "right": b.shape},
        )
    if a.shape[2] != b.shape[1]:
        raise DimensionError(
            f"matmul_batched: inner axes a[2]={a.shape[2]} and b[1]={b.shape[1]} differ",
            {"axes": ("a[2]", "b[1]"), "left": a.shape, "right": b.shape},
        )
    return Tensor._adopt(ordered_matmul(a.array, b.array), op="matmul_batched")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Rank-2 or rank-3 product; rank-2 operands are treated as a batch of one."""
    if a.rank == 2 and b.rank == 2:
        out = matmul_batched(
            reshape(a, (1,) + a.shape), reshape(b, (1,) + b.shape)
        )
        return reshape(out, out.shape[1:])
    return matmul_batched(a, b)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _normalize_axis(x, axis, "softmax")
    shifted = x.array - np.max(x.array, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    return Tensor._adopt(exps / ordered_sum(exps, axis), op="softmax")


def avg_pool_rows(x: Tensor) -> Tensor:
    """Mean over H with an H x 1 window: C x H x W -> C x 1 x W."""
    _require_rank(x, 3, "avg_pool_rows")
    return Tensor._adopt(
        ordered_sum(x.array, 1) / x.shape[1], op="avg_pool_rows"
    )


def avg_pool_cols(x: Tensor) -> Tensor:
    """Mean over W with a 1 x W window: C x H x W -> C x H x 1."""
    _require_rank(x, 3, "avg_pool_cols")
    return Tensor._adopt(
        ordered_sum(x.array, 2) / x.shape[2], op="avg_pool_cols"
    )


def slice_stack_h(x: Tensor) -> Tensor:
    """Cut along H: C x H x W -> H x C x W."""
    _require_rank(x, 3, "slice_stack_h")
    return Tensor._adopt(x.array.transpose(1, 0, 2), op="slice_stack_h")


def slice_stack_w(x: Tensor) -> Tensor:
    """Cut along W: C x H x W -> W x C x H."""
    _require_rank(x, 3, "slice_stack_w")
    return Tensor._adopt(x.array.transpose(2, 0, 1), op="slice_stack_w")


def unstack_h(x: Tensor) -> Tensor:
    """Inverse of slice_stack_h: H x C x W -> C x H x W."""
    _require_rank(x, 3, "unstack_h")
    return Tensor._adopt(x.array.transpose(1, 0, 2), op="unstack_h")


def unstack_w(x: Tensor) -> Tensor:
    """Inverse of slice_stack_w: W x C x H -> C x H x W."""
    _require_rank(x, 3, "unstack_w")
    return Tensor._adopt(x.array.transpose(1, 2, 0), op="unstack_w")


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise DimensionError("concat needs at least one part")
    first = parts[0]
    axis = _normalize_axis(first, axis, "concat")
    for index, part in enumerate(parts[1:], start=1):
        if part.rank != first.rank or any(
            part.shape[d] != first.shape[d] for d in range(first.rank) if d != axis
        ):
            raise DimensionError(
                f"concat: part {index} has shape {list(part.shape)}, "
                f"incompatible with {list(first.shape)} off axis {axis}",
                {"part": index, "axis": axis, "shape": part.shape},
            )
    return Tensor._adopt(
        np.concatenate([p.array for p in parts], axis=axis), op="concat"
    )


def split(x: Tensor, sizes: Sequence[int], axis: int = 0) -> list[Tensor]:
    axis = _normalize_axis(x, axis, "split")
    if sum(sizes) != x.shape[axis]:
        raise DimensionError(
            f"split: sizes {list(sizes)} do not add up to extent {x.shape[axis]}",
            {"axis": axis, "sizes": tuple(sizes)},
        )
    parts = []
    start = 0
    for size in sizes:
        parts.append(take(x, start, start + size, axis))
        start += size
    return parts


def take(x: Tensor, start: int, stop: int, axis: int = 0) -> Tensor:
    axis = _normalize_axis(x, axis, "take")
    if not 0 <= start < stop <= x.shape[axis]:
        raise DimensionError(
            f"take: range [{start}, {stop}) outside extent {x.shape[axis]}",
            {"axis": axis, "start": start, "stop": stop},
        )
    index = [slice(None)] * x.rank
    index[axis] = slice(start, stop)
    return Tensor._adopt(x.array[tuple(index)].copy(), op="take")


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")
    return Tensor._adopt(a.array + b.array, op="add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "sub")
    return Tensor._adopt(a.array - b.array, op="sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "mul")
    return Tensor._adopt(a.array * b.array, op="mul")


def scale(x: Tensor, factor: float) -> Tensor:
    return Tensor._adopt(x.array * float(factor), op="scale")


def linear_channels(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """out[c, ...] = sum_k w[c, k] * x[k, ...] + b[c]."""
    if w.rank != 2 or b.rank != 1 or b.shape[0] != w.shape[0]:
        raise DimensionError(
            f"linear_channels: weight {list(w.shape)} and bias {list(b.shape)} disagree",
            {"weight": w.shape, "bias": b.shape},
        )
    if w.shape[1] != x.shape[0]:
        raise DimensionError(
            f"linear_channels: weight expects {w.shape[1]} channels, input has {x.shape[0]}",
            {"axes": ("w[1]", "x[0]"), "weight": w.shape, "input": x.shape},
        )
    flat = x.array.reshape(x.shape[0], -1)
    out = ordered_matmul(w.array, flat) + b.array[:, None]
    return Tensor._adopt(
        out.reshape((w.shape[0],) + x.shape[1:]), op="linear_channels"
    )


def transpose_last(x: Tensor) -> Tensor:
    if x.rank < 2:
        raise DimensionError(
            "transpose_last needs rank >= 2", {"shape": x.shape}
        )
    return Tensor._adopt(np.swapaxes(x.array, -1, -2), op="transpose_last")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(e) for e in shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError(
            f"reshape: {list(x.shape)} cannot become {list(shape)}",
            {"from": x.shape, "to": shape},
        )
    return Tensor._adopt(x.array.reshape(shape), op="reshape")


def tile_batch(x: Tensor, n: int) -> Tensor:
    """Stack n copies of x along a new leading axis."""
    if n < 1:
        raise DimensionError("tile_batch needs n >= 1", {"n": n})
    return Tensor._adopt(
        np.broadcast_to(x.array, (n,) + x.shape).copy(), op="tile_batch"
    )


def sum_all(x: Tensor) -> Tensor:
    return Tensor._adopt(ordered_sum(x.data, 0), op="sum_all")


def sum_squares(x: Tensor) -> Tensor:
    flat = x.data
    return Tensor._adopt(ordered_sum(flat * flat, 0), op="sum_squares")
