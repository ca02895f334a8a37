from typing import Mapping

from ...autograd import functional as F
from ...autograd.tape import Var
from ...constants import BlockKind
from .base import BaseBlock, BlockGraph, FrozenMaps
from .channel_nl import ChannelNLBlock
from .params import BlockParams
from .spatial_nl import SpatialNLBlock


class CompositeBlock(BaseBlock):
    """Channel NL and Spatial NL combined over one shared parameter set."""

    def __init__(self, softmax_axis: int = -1):
        super().__init__(softmax_axis)
        self.channel = ChannelNLBlock(softmax_axis)
        self.spatial = SpatialNLBlock(softmax_axis)

    def apply(
        self,
        params: BlockParams,
        leaves: Mapping[str, Var],
        x: Var,
        frozen: FrozenMaps | None = None,
        prior_source: Var | None = None,
    ) -> BlockGraph:
        self.check(params, x.value)
        output, saved = self.combine(params, leaves, x, frozen)
        return BlockGraph(output=output, context=F.sub(output, x), saved=saved)

    def combine(self, params, leaves, x, frozen) -> tuple[Var, dict[str, Var]]:
        raise NotImplementedError


class DualNLBlock(CompositeBlock):
    """Parallel branches; the shared residual is counted once."""

    kind = BlockKind.DUAL_NL

    def combine(self, params, leaves, x, frozen):
        channel = self.channel.apply(params, leaves, x, frozen=frozen)
        spatial = self.spatial.context(params, leaves, x, frozen=frozen)
        output = F.add(
            channel.output, F.scale_by(spatial.context, leaves["spatial.gamma"])
        )
        return output, {**channel.saved, **spatial.saved}


class CSNLBlock(CompositeBlock):
    """Channel NL followed by Spatial NL."""

    kind = BlockKind.CS_NL

    def combine(self, params, leaves, x, frozen):
        channel = self.channel.apply(params, leaves, x, frozen=frozen)
        spatial = self.spatial.apply(params, leaves, channel.output, frozen=frozen)
        return spatial.output, {**channel.saved, **spatial.saved}
