"""Learnable state of the attention blocks and its initializers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

from ...constants import BlockKind
from ...core.tensor import Rng, Tensor
from ...exceptions import ConfigurationError

CHANNEL_PREFIX = "channel."
SPATIAL_PREFIX = "spatial."
FLA_PREFIX = "fla."

# name -> shape as a function of (channels, reduced channels)
_ShapeFn = Callable[[int, int], tuple[int, ...]]

_CHANNEL_PARAMS: tuple[tuple[str, _ShapeFn], ...] = (
    ("channel.gamma", lambda c, r: (1,)),
)
_SPATIAL_PARAMS: tuple[tuple[str, _ShapeFn], ...] = (
    ("spatial.query.weight", lambda c, r: (r, c)),
    ("spatial.query.bias", lambda c, r: (r,)),
    # no key bias: it shifts a whole softmax row and never receives gradient
    ("spatial.key.weight", lambda c, r: (r, c)),
    ("spatial.value.weight", lambda c, r: (c, c)),
    ("spatial.value.bias", lambda c, r: (c,)),
    ("spatial.gamma", lambda c, r: (1,)),
)
_FLA_PARAMS: tuple[tuple[str, _ShapeFn], ...] = (
    ("fla.linear_w.weight", lambda c, r: (c, c)),
    ("fla.linear_w.bias", lambda c, r: (c,)),
    ("fla.linear_h.weight", lambda c, r: (c, c)),
    ("fla.linear_h.bias", lambda c, r: (c,)),
    ("fla.gamma", lambda c, r: (1,)),
)

PARAM_LAYOUT: dict[BlockKind, tuple[tuple[str, _ShapeFn], ...]] = {
    BlockKind.CHANNEL_NL: _CHANNEL_PARAMS,
    BlockKind.SPATIAL_NL: _SPATIAL_PARAMS,
    BlockKind.FLA: _FLA_PARAMS,
    BlockKind.DUAL_NL: _CHANNEL_PARAMS + _SPATIAL_PARAMS,
    BlockKind.CS_NL: _CHANNEL_PARAMS + _SPATIAL_PARAMS,
}

GAMMA_NAMES: dict[BlockKind, tuple[str, ...]] = {
    BlockKind.CHANNEL_NL: ("channel.gamma",),
    BlockKind.SPATIAL_NL: ("spatial.gamma",),
    BlockKind.FLA: ("fla.gamma",),
    BlockKind.DUAL_NL: ("channel.gamma", "spatial.gamma"),
    BlockKind.CS_NL: ("channel.gamma", "spatial.gamma"),
}


def uses_reduction(kind: BlockKind) -> bool:
    return kind in (BlockKind.SPATIAL_NL, BlockKind.DUAL_NL, BlockKind.CS_NL)


@dataclass(frozen=True)
class BlockParams:
    kind: BlockKind
    channels: int
    reduction: int = 1
    tensors: Mapping[str, Tensor] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", BlockKind(self.kind))
        if self.channels < 1:
            raise ConfigurationError(
                f"channels must be positive, got {self.channels}"
            )
        if self.reduction < 1 or (
            uses_reduction(self.kind) and self.channels % self.reduction
        ):
            raise ConfigurationError(
                f"reduction ratio {self.reduction} does not divide C={self.channels}",
                {"channels": self.channels, "reduction": self.reduction},
            )
        reduced = self.channels // self.reduction
        expected = {
            name: shape_fn(self.channels, reduced)
            for name, shape_fn in PARAM_LAYOUT[self.kind]
        }
        missing = sorted(set(expected) - set(self.tensors))
        extra = sorted(set(self.tensors) - set(expected))
        if missing or extra:
            raise ConfigurationError(
                f"{self.kind.value} parameters: missing {missing}, unexpected {extra}",
                {"missing": missing, "extra": extra},
            )
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ConfigurationError(
                    f"{name} has shape {list(self.tensors[name].shape)}, expected {list(shape)}",
                    {"name": name},
                )
        ordered = {name: self.tensors[name] for name in expected}
        object.__setattr__(self, "tensors", MappingProxyType(ordered))

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> tuple[str, ...]:
        return tuple(self.tensors)

    def gamma(self, name: str | None = None) -> float:
        name = name or GAMMA_NAMES[self.kind][0]
        return self.tensors[name].item()

    def replace(self, updates: Mapping[str, Tensor]) -> BlockParams:
        tensors = dict(self.tensors)
        for name, value in updates.items():
            if name not in tensors:
                raise ConfigurationError(f"unknown parameter {name}")
            tensors[name] = value
        return BlockParams(self.kind, self.channels, self.reduction, tensors)

    def with_gammas(self, *values: float) -> BlockParams:
        """Set the residual scales in GAMMA_NAMES order; one value applies to all."""
        names = GAMMA_NAMES[self.kind]
        if len(values) == 1:
            values = values * len(names)
        if len(values) != len(names):
            raise ConfigurationError(
                f"{self.kind.value} has {len(names)} gamma(s), got {len(values)} values"
            )
        return self.replace(
            {name: Tensor.scalar(v) for name, v in zip(names, values)}
        )

    def constituent(self, kind: BlockKind) -> BlockParams:
        """Parameter view of one branch of a composite block."""
        prefix = {
            BlockKind.CHANNEL_NL: CHANNEL_PREFIX,
            BlockKind.SPATIAL_NL: SPATIAL_PREFIX,
        }[kind]
        tensors = {n: t for n, t in self.tensors.items() if n.startswith(prefix)}
        reduction = self.reduction if kind == BlockKind.SPATIAL_NL else 1
        return BlockParams(kind, self.channels, reduction, tensors)


def init_params(
    kind: BlockKind,
    channels: int,
    rng: Rng | None = None,
    reduction: int = 8,
    gamma: float = 0.0,
) -> BlockParams:
    """Untrained parameters: gamma = 0, FLA linears identity with zero bias,
    spatial projections uniform in +-1/sqrt(C) with zero bias."""
    kind = BlockKind(kind)
    if not uses_reduction(kind):
        reduction = 1
    elif channels % reduction:
        raise ConfigurationError(
            f"reduction ratio {reduction} does not divide C={channels}",
            {"channels": channels, "reduction": reduction},
        )
    reduced = channels // reduction
    bound = 1.0 / math.sqrt(channels)
    rng = rng or Rng(0)
    tensors: dict[str, Tensor] = {}
    for name, shape_fn in PARAM_LAYOUT[kind]:
        shape = shape_fn(channels, reduced)
        if name.endswith("gamma"):
            tensors[name] = Tensor.scalar(gamma)
        elif name.startswith(FLA_PREFIX) and name.endswith("weight"):
            tensors[name] = Tensor.eye(channels)
        elif name.endswith("weight"):
            tensors[name] = rng.uniform(shape, -bound, bound)
        else:
            tensors[name] = Tensor.zeros(shape)
    return BlockParams(kind, channels, reduction, tensors)


def random_params(
    kind: BlockKind,
    channels: int,
    rng: Rng,
    reduction: int = 1,
    gamma: float | None = None,
) -> BlockParams:
    """Every tensor drawn uniform in [-1, 1]; ``gamma`` pins the residual scales."""
    kind = BlockKind(kind)
    if not uses_reduction(kind):
        reduction = 1
    base = init_params(kind, channels, rng, reduction=reduction)
    params = base.replace(
        {name: rng.uniform(base[name].shape) for name in base.names()}
    )
    if gamma is not None:
        params = params.with_gammas(gamma)
    return params


def largest_divisor_at_most(channels: int, limit: int) -> int:
    """Largest reduction ratio not above ``limit`` that divides ``channels``."""
    for candidate in range(min(limit, channels), 0, -1):
        if channels % candidate == 0:
            return candidate
    return 1
