from typing import Mapping

from ...autograd import functional as F
from ...autograd.tape import Var
from ...constants import BlockKind
from .base import BaseBlock, BlockGraph, FrozenMaps
from .params import BlockParams


class ChannelNLBlock(BaseBlock):
    """Channel non-local block: a C x C map from the global Gram matrix."""

    kind = BlockKind.CHANNEL_NL

    def context(
        self,
        params: BlockParams,
        leaves: Mapping[str, Var],
        x: Var,
        frozen: FrozenMaps | None = None,
        prior_source: Var | None = None,
    ) -> BlockGraph:
        channels, height, width = x.shape
        features = F.reshape(x, (channels, height * width))
        logits = F.matmul(features, F.transpose_last(features))
        attention = self.attend(logits, "channel", frozen)
        mixed = F.matmul(attention, features)
        context = F.reshape(mixed, (channels, height, width))
        return BlockGraph(
            output=context,
            context=context,
            saved={"attention.channel": attention},
        )
