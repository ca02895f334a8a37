from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import ClassVar, Mapping, Optional

from ...autograd import functional as F
from ...autograd.gradcheck import LossFn, grad_check_function
from ...autograd.tape import Tape, Var
from ...constants import BlockKind, Stencil
from ...core.tensor import Tensor
from ...exceptions import ConfigurationError, DimensionError
from ...models import GradCheckReport
from .params import BlockParams

INPUT = "input"

# Frozen attention maps, keyed by the branch that produced them
FrozenMaps = Mapping[str, Tensor]


@dataclass(frozen=True)
class ForwardTrace:
    kind: BlockKind
    output: Tensor
    context: Tensor
    attention_maps: Mapping[str, Tensor] = field(default_factory=dict)
    q_hat_w: Optional[Tensor] = None
    q_hat_h: Optional[Tensor] = None
    q: Optional[Tensor] = None
    k: Optional[Tensor] = None
    v: Optional[Tensor] = None

    @property
    def attention(self) -> Tensor:
        return next(iter(self.attention_maps.values()))


@dataclass
class BlockGraph:
    """Vars recorded by one forward on a tape."""

    output: Var
    context: Var
    saved: dict[str, Var] = field(default_factory=dict)


class BaseBlock:
    kind: ClassVar[BlockKind]

    def __init__(self, softmax_axis: int = -1):
        # Anything but -1 is a fault-injection hook for the verify suites
        self.softmax_axis = softmax_axis

    def forward(
        self,
        params: BlockParams,
        f_in: Tensor,
        frozen: FrozenMaps | None = None,
        prior_source: Tensor | None = None,
    ) -> ForwardTrace:
        tape = Tape()
        leaves = bind_params(tape, params)
        x = tape.leaf(f_in, INPUT)
        source = tape.leaf(prior_source, "prior_source") if prior_source is not None else None
        graph = self.apply(params, leaves, x, frozen=frozen, prior_source=source)
        return self.trace(graph)

    def apply(
        self,
        params: BlockParams,
        leaves: Mapping[str, Var],
        x: Var,
        frozen: FrozenMaps | None = None,
        prior_source: Var | None = None,
    ) -> BlockGraph:
        self.check(params, x.value)
        graph = self.context(params, leaves, x, frozen=frozen, prior_source=prior_source)
        gamma = leaves[f"{self.branch}.gamma"]
        graph.output = F.add(F.scale_by(graph.context, gamma), x)
        return graph

    def context(
        self,
        params: BlockParams,
        leaves: Mapping[str, Var],
        x: Var,
        frozen: FrozenMaps | None = None,
        prior_source: Var | None = None,
    ) -> BlockGraph:
        raise NotImplementedError

    def loss_fn(self, params: BlockParams) -> LossFn:
        """Sum of squared outputs over leaves named like the parameters plus ``input``."""

        def loss(tape: Tape, leaves: Mapping[str, Var]) -> Var:
            graph = self.apply(params, leaves, leaves[INPUT])
            return F.sum_squares(graph.output)

        return loss

    def grad_check(
        self,
        params: BlockParams,
        f_in: Tensor,
        h: float = 1e-4,
        stencil: Stencil = Stencil.CENTRAL,
    ) -> GradCheckReport:
        inputs = {**params.tensors, INPUT: f_in}
        return grad_check_function(self.loss_fn(params), inputs, h, stencil)

    @property
    def branch(self) -> str:
        return self.kind.value.split("_")[0]

    def check(self, params: BlockParams, f_in: Tensor) -> None:
        if params.kind != self.kind and self.kind not in _ACCEPTS.get(params.kind, ()):
            raise ConfigurationError(
                f"{self.kind.value} block got {params.kind.value} parameters"
            )
        if f_in.rank != 3:
            raise DimensionError(
                f"{self.kind.value} expects a C x H x W input, got shape {list(f_in.shape)}",
                {"shape": f_in.shape},
            )
        if f_in.shape[0] != params.channels:
            raise DimensionError(
                f"input has {f_in.shape[0]} channels, parameters expect {params.channels}",
                {"axes": ("input[0]",), "shape": f_in.shape},
            )

    def attend(
        self, logits: Var, key: str, frozen: FrozenMaps | None
    ) -> Var:
        if frozen is not None and key in frozen:
            return logits.tape.leaf(frozen[key], f"frozen.{key}")
        return F.softmax(logits, self.softmax_axis)

    def trace(self, graph: BlockGraph) -> ForwardTrace:
        maps = {
            name.removeprefix("attention."): var.value
            for name, var in graph.saved.items()
            if name.startswith("attention.")
        }
        extras = {
            name: graph.saved[name].value
            for name in ("q_hat_w", "q_hat_h", "q", "k", "v")
            if name in graph.saved
        }
        return ForwardTrace(
            kind=self.kind,
            output=graph.output.value,
            context=graph.context.value,
            attention_maps=MappingProxyType(maps),
            **extras,
        )


# Composite parameter sets also drive their constituent blocks
_ACCEPTS = {
    BlockKind.DUAL_NL: (BlockKind.CHANNEL_NL, BlockKind.SPATIAL_NL),
    BlockKind.CS_NL: (BlockKind.CHANNEL_NL, BlockKind.SPATIAL_NL),
}


def bind_params(tape: Tape, params: BlockParams) -> dict[str, Var]:
    return {name: tape.leaf(params[name], name) for name in params.names()}
