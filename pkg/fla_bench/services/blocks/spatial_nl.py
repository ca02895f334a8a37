from typing import Mapping

from ...autograd import functional as F
from ...autograd.tape import Var
from ...constants import BlockKind
from ...core.tensor import Tensor
from .base import BaseBlock, BlockGraph, FrozenMaps
from .params import BlockParams


class SpatialNLBlock(BaseBlock):
    """Position-to-position non-local block over all H*W locations."""

    kind = BlockKind.SPATIAL_NL

    def context(
        self,
        params: BlockParams,
        leaves: Mapping[str, Var],
        x: Var,
        frozen: FrozenMaps | None = None,
        prior_source: Var | None = None,
    ) -> BlockGraph:
        channels, height, width = x.shape
        positions = height * width
        reduced = channels // params.reduction

        no_bias = x.tape.leaf(Tensor.zeros((reduced,)))
        query = F.reshape(
            F.linear_channels(
                x, leaves["spatial.query.weight"], leaves["spatial.query.bias"]
            ),
            (reduced, positions),
        )
        key = F.reshape(
            F.linear_channels(x, leaves["spatial.key.weight"], no_bias),
            (reduced, positions),
        )
        value = F.reshape(
            F.linear_channels(
                x, leaves["spatial.value.weight"], leaves["spatial.value.bias"]
            ),
            (channels, positions),
        )

        # logits[p, p'] = q_p . k_p'; each row normalized over the keys
        logits = F.matmul(F.transpose_last(query), key)
        attention = self.attend(logits, "spatial", frozen)
        mixed = F.matmul(value, F.transpose_last(attention))
        context = F.reshape(mixed, (channels, height, width))
        return BlockGraph(
            output=context,
            context=context,
            saved={"attention.spatial": attention},
        )
