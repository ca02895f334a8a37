"""Scalar-loop reference implementations of every block.

Written directly from the block definitions with nested Python loops and
``math.fsum``; it shares no code with the vectorized blocks beyond the tensor
container and the parameter layout, so agreement between the two is evidence
that both are right.
"""

from __future__ import annotations

import math
from typing import Sequence

from .constants import BlockKind
from .core.tensor import Tensor
from .exceptions import DimensionError, OracleRefusalError
from .services.blocks.params import BlockParams

DEFAULT_MAX_SCALARS = 10_000

Grid = list[list[list[float]]]
Matrix = list[list[float]]


def _admit(f_in: Tensor, max_scalars: int) -> tuple[int, int, int]:
    if f_in.rank != 3:
        raise DimensionError(
            f"oracle expects a C x H x W input, got shape {list(f_in.shape)}"
        )
    if f_in.size > max_scalars:
        raise OracleRefusalError(
            f"input has {f_in.size} scalars, oracle limit is {max_scalars}",
            {"size": f_in.size, "limit": max_scalars},
        )
    return f_in.shape


def _softmax_row(logits: Sequence[float]) -> list[float]:
    peak = max(logits)
    exps = [math.exp(v - peak) for v in logits]
    total = math.fsum(exps)
    return [e / total for e in exps]


def _flatten(grid: Grid) -> Matrix:
    return [[v for row in plane for v in row] for plane in grid]


def _unflatten(flat: Matrix, height: int, width: int) -> Grid:
    return [
        [[plane[h * width + w] for w in range(width)] for h in range(height)]
        for plane in flat
    ]


def _residual(context: Grid, grid: Grid, gamma: float) -> Tensor:
    return Tensor(
        [
            [
                [gamma * context[c][h][w] + grid[c][h][w] for w in range(len(grid[0][0]))]
                for h in range(len(grid[0]))
            ]
            for c in range(len(grid))
        ]
    )


def _project(weight: Matrix, bias: Sequence[float] | None, flat: Matrix) -> Matrix:
    out_channels = len(weight)
    positions = len(flat[0])
    result = []
    for o in range(out_channels):
        row = []
        for p in range(positions):
            terms = [weight[o][k] * flat[k][p] for k in range(len(flat))]
            if bias is not None:
                terms.append(bias[o])
            row.append(math.fsum(terms))
        result.append(row)
    return result


def _channel_context(grid: Grid) -> Grid:
    channels, height, width = len(grid), len(grid[0]), len(grid[0][0])
    flat = _flatten(grid)
    positions = height * width
    attention = [
        _softmax_row(
            [
                math.fsum(flat[j][p] * flat[i][p] for p in range(positions))
                for i in range(channels)
            ]
        )
        for j in range(channels)
    ]
    mixed = [
        [
            math.fsum(attention[j][i] * flat[i][p] for i in range(channels))
            for p in range(positions)
        ]
        for j in range(channels)
    ]
    return _unflatten(mixed, height, width)


def _spatial_context(params: BlockParams, grid: Grid) -> Grid:
    height, width = len(grid[0]), len(grid[0][0])
    flat = _flatten(grid)
    positions = height * width
    query = _project(
        params["spatial.query.weight"].tolist(),
        params["spatial.query.bias"].tolist(),
        flat,
    )
    key = _project(params["spatial.key.weight"].tolist(), None, flat)
    value = _project(
        params["spatial.value.weight"].tolist(),
        params["spatial.value.bias"].tolist(),
        flat,
    )
    reduced = len(query)
    attention = [
        _softmax_row(
            [
                math.fsum(query[r][p] * key[r][t] for r in range(reduced))
                for t in range(positions)
            ]
        )
        for p in range(positions)
    ]
    mixed = [
        [
            math.fsum(value[c][t] * attention[p][t] for t in range(positions))
            for p in range(positions)
        ]
        for c in range(len(value))
    ]
    return _unflatten(mixed, height, width)


def _fla_priors(params: BlockParams, grid: Grid) -> tuple[Matrix, Matrix]:
    channels, height, width = len(grid), len(grid[0]), len(grid[0][0])
    pooled_w = [
        [math.fsum(grid[c][h][w] for h in range(height)) / height for w in range(width)]
        for c in range(channels)
    ]
    pooled_h = [
        [math.fsum(grid[c][h][w] for w in range(width)) / width for h in range(height)]
        for c in range(channels)
    ]
    prior_w = _project(
        params["fla.linear_w.weight"].tolist(), params["fla.linear_w.bias"].tolist(), pooled_w
    )
    prior_h = _project(
        params["fla.linear_h.weight"].tolist(), params["fla.linear_h.bias"].tolist(), pooled_h
    )
    return prior_w, prior_h


def _slice_attention(prior: Matrix, features: Matrix) -> Matrix:
    """attention[j][i] = softmax over i of sum_s prior[i][s] * features[j][s]."""
    channels = len(features)
    extent = len(features[0])
    return [
        _softmax_row(
            [
                math.fsum(prior[i][s] * features[j][s] for s in range(extent))
                for i in range(channels)
            ]
        )
        for j in range(channels)
    ]


def _fla_slices(params: BlockParams, grid: Grid) -> list[tuple[Matrix, Matrix]]:
    """(attention, features) for the H row slices followed by the W column slices."""
    channels, height, width = len(grid), len(grid[0]), len(grid[0][0])
    prior_w, prior_h = _fla_priors(params, grid)
    slices = []
    for h in range(height):
        features = [[grid[c][h][w] for w in range(width)] for c in range(channels)]
        slices.append((_slice_attention(prior_w, features), features))
    for w in range(width):
        features = [[grid[c][h][w] for h in range(height)] for c in range(channels)]
        slices.append((_slice_attention(prior_h, features), features))
    return slices


def _aggregate(attention: Matrix, features: Matrix) -> Matrix:
    channels = len(features)
    return [
        [
            math.fsum(attention[j][i] * features[i][s] for i in range(channels))
            for s in range(len(features[0]))
        ]
        for j in range(channels)
    ]


def oracle_channel_nl(
    params: BlockParams, f_in: Tensor, max_scalars: int = DEFAULT_MAX_SCALARS
) -> Tensor:
    _admit(f_in, max_scalars)
    grid = f_in.tolist()
    return _residual(_channel_context(grid), grid, params.gamma("channel.gamma"))


def oracle_spatial_nl(
    params: BlockParams, f_in: Tensor, max_scalars: int = DEFAULT_MAX_SCALARS
) -> Tensor:
    _admit(f_in, max_scalars)
    grid = f_in.tolist()
    return _residual(_spatial_context(params, grid), grid, params.gamma("spatial.gamma"))


def oracle_fla_attention(
    params: BlockParams, f_in: Tensor, max_scalars: int = DEFAULT_MAX_SCALARS
) -> Tensor:
    _admit(f_in, max_scalars)
    return Tensor([a for a, _ in _fla_slices(params, f_in.tolist())])


def oracle_fla(
    params: BlockParams, f_in: Tensor, max_scalars: int = DEFAULT_MAX_SCALARS
) -> Tensor:
    channels, height, width = _admit(f_in, max_scalars)
    grid = f_in.tolist()
    slices = _fla_slices(params, grid)
    context = [[[0.0] * width for _ in range(height)] for _ in range(channels)]
    for h in range(height):
        mixed = _aggregate(*slices[h])
        for c in range(channels):
            for w in range(width):
                context[c][h][w] += mixed[c][w]
    for w in range(width):
        mixed = _aggregate(*slices[height + w])
        for c in range(channels):
            for h in range(height):
                context[c][h][w] += mixed[c][h]
    return _residual(context, grid, params.gamma("fla.gamma"))


def oracle_dual(
    params: BlockParams, f_in: Tensor, max_scalars: int = DEFAULT_MAX_SCALARS
) -> Tensor:
    _admit(f_in, max_scalars)
    grid = f_in.tolist()
    channel_out = _residual(_channel_context(grid), grid, params.gamma("channel.gamma"))
    return _residual(
        _spatial_context(params, grid), channel_out.tolist(), params.gamma("spatial.gamma")
    )


def oracle_cs(
    params: BlockParams, f_in: Tensor, max_scalars: int = DEFAULT_MAX_SCALARS
) -> Tensor:
    _admit(f_in, max_scalars)
    grid = f_in.tolist()
    middle = _residual(_channel_context(grid), grid, params.gamma("channel.gamma")).tolist()
    return _residual(_spatial_context(params, middle), middle, params.gamma("spatial.gamma"))


ORACLES = {
    BlockKind.CHANNEL_NL: oracle_channel_nl,
    BlockKind.SPATIAL_NL: oracle_spatial_nl,
    BlockKind.FLA: oracle_fla,
    BlockKind.DUAL_NL: oracle_dual,
    BlockKind.CS_NL: oracle_cs,
}


def oracle_forward(
    params: BlockParams, f_in: Tensor, max_scalars: int = DEFAULT_MAX_SCALARS
) -> Tensor:
    return ORACLES[params.kind](params, f_in, max_scalars)
