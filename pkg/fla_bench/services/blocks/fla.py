"""Fully Attentional block: per-slice channel attention steered by pooled spatial priors.

The input is cut into H row slices (C x W each) and W column slices (C x H each).
Every row slice attends against the column-pooled prior Q_hat_w and every column
slice against the row-pooled prior Q_hat_h, so each C x C map carries spatial
context from a whole row or column. Square inputs run both groups as one merged
(H+W)-slice batch; other inputs run the two groups one after the other.
"""

from __future__ import annotations

from enum import Enum
from typing import Mapping

from ...autograd import functional as F
from ...autograd.tape import Var
from ...constants import BlockKind
from ...core import ops
from ...exceptions import DimensionError
from ...logging_utils import get_logger
from .base import BaseBlock, BlockGraph, FrozenMaps
from .params import BlockParams

logger = get_logger(__name__)


class SlicePath(str, Enum):
    AUTO = "auto"
    MERGED = "merged"
    GROUPED = "grouped"


class FLABlock(BaseBlock):
    kind = BlockKind.FLA

    def __init__(self, softmax_axis: int = -1, path: SlicePath = SlicePath.AUTO):
        super().__init__(softmax_axis)
        self.path = SlicePath(path)

    def resolve_path(self, height: int, width: int) -> SlicePath:
        if self.path == SlicePath.AUTO:
            return SlicePath.MERGED if height == width else SlicePath.GROUPED
        if self.path == SlicePath.MERGED and height != width:
            raise DimensionError(
                f"merged slice batch needs a square input, got H={height} W={width}",
                {"axes": ("input[1]", "input[2]"), "height": height, "width": width},
            )
        return self.path

    def context(
        self,
        params: BlockParams,
        leaves: Mapping[str, Var],
        x: Var,
        frozen: FrozenMaps | None = None,
        prior_source: Var | None = None,
    ) -> BlockGraph:
        channels, height, width = x.shape
        source = x if prior_source is None else prior_source
        if source.shape != x.shape:
            raise DimensionError(
                f"prior source {list(source.shape)} does not match input {list(x.shape)}"
            )

        q_hat_w = F.linear_channels(
            F.avg_pool_rows(source),
            leaves["fla.linear_w.weight"],
            leaves["fla.linear_w.bias"],
        )
        q_hat_h = F.linear_channels(
            F.avg_pool_cols(source),
            leaves["fla.linear_h.weight"],
            leaves["fla.linear_h.bias"],
        )

        # The repeated C x H x W prior map is never built: every row slice sees
        # the same C x W prior and every column slice the same C x H prior.
        q_rows = F.tile_batch(F.reshape(q_hat_w, (channels, width)), height)
        q_cols = F.tile_batch(F.reshape(q_hat_h, (channels, height)), width)
        v_rows = F.slice_stack_h(x)
        v_cols = F.slice_stack_w(x)

        saved: dict[str, Var] = {"q_hat_w": q_hat_w, "q_hat_h": q_hat_h}
        path = self.resolve_path(height, width)
        if path == SlicePath.MERGED:
            q = F.concat([q_rows, q_cols])
            v = F.concat([v_rows, v_cols])
            attention = self._slice_attention(v, q, frozen, 0, height + width)
            mixed = F.matmul(attention, v)
            ctx_rows, ctx_cols = F.split(mixed, [height, width])
            saved.update(q=q, k=F.transpose_last(v), v=v)
        else:
            attn_rows = self._slice_attention(v_rows, q_rows, frozen, 0, height)
            attn_cols = self._slice_attention(
                v_cols, q_cols, frozen, height, height + width
            )
            ctx_rows = F.matmul(attn_rows, v_rows)
            ctx_cols = F.matmul(attn_cols, v_cols)
            attention = F.concat([attn_rows, attn_cols])

        saved["attention.fla"] = attention
        context = F.add(F.unstack_h(ctx_rows), F.unstack_w(ctx_cols))
        logger.debug(f"FLA context over {height + width} slices via {path.value} path")
        return BlockGraph(output=context, context=context, saved=saved)

    def _slice_attention(
        self, v: Var, q: Var, frozen: FrozenMaps | None, start: int, stop: int
    ) -> Var:
        # attention[n, j, i]: consumer channel j over prior channel i
        if frozen is not None and "fla" in frozen:
            return v.tape.leaf(ops.take(frozen["fla"], start, stop, 0), "frozen.fla")
        logits = F.matmul(v, F.transpose_last(q))
        return F.softmax(logits, self.softmax_axis)
