"""Jacobian sparsity: which output positions react to one input coordinate."""

from __future__ import annotations

import numpy as np

from ...constants import BlockKind
from ...core.tensor import Tensor
from ...exceptions import ConfigurationError, DimensionError
from ...logging_utils import get_logger
from ...models import MixingReport
from .base import BaseBlock, ForwardTrace
from .params import BlockParams

logger = get_logger(__name__)

PERTURBATION_DELTA = 1e-3
MOVE_THRESHOLD = 1e-9


def _moved_positions(base: Tensor, perturbed: Tensor, threshold: float) -> list[tuple[int, int]]:
    diff = np.abs(perturbed.array - base.array).max(axis=0)
    rows, cols = np.nonzero(diff > threshold)
    return sorted((int(h), int(w)) for h, w in zip(rows, cols))


def mixing_structure(
    block: BaseBlock,
    trace: ForwardTrace,
    params: BlockParams,
    f_in: Tensor,
    source: tuple[int, int, int] = (0, 0, 0),
    delta: float = PERTURBATION_DELTA,
    threshold: float = MOVE_THRESHOLD,
) -> MixingReport:
    """Perturb ``f_in`` at ``source`` = (c, h, w) and record which (h, w) outputs move.

    Three forwards are run: the live forward, the forward with every attention map
    frozen at its value in ``trace``, and (for blocks with pooled priors) a forward
    where only the priors see the perturbed input.
    """
    if trace.kind != block.kind:
        raise ConfigurationError(
            f"trace came from {trace.kind.value}, block is {block.kind.value}"
        )
    if trace.output.shape != f_in.shape:
        raise DimensionError(
            f"trace output {list(trace.output.shape)} does not match input {list(f_in.shape)}"
        )
    c, h, w = source
    channels, height, width = f_in.shape
    if not (0 <= c < channels and 0 <= h < height and 0 <= w < width):
        raise DimensionError(
            f"source {source} outside input {list(f_in.shape)}", {"source": source}
        )

    flat = (c * height + h) * width + w
    perturbed = f_in.with_value(flat, f_in.data[flat] + delta)

    live = block.forward(params, perturbed).output
    frozen = block.forward(params, perturbed, frozen=trace.attention_maps).output
    if block.kind == BlockKind.FLA:
        prior_only = block.forward(params, f_in, prior_source=perturbed).output
        moved_prior_only = _moved_positions(trace.output, prior_only, threshold)
    else:
        moved_prior_only = []

    report = MixingReport(
        kind=block.kind,
        source=source,
        moved=_moved_positions(trace.output, live, threshold),
        moved_frozen_attention=_moved_positions(trace.output, frozen, threshold),
        moved_prior_only=moved_prior_only,
    )
    logger.debug(
        f"Mixing from {source} on {block.kind.value}: {len(report.moved)} positions moved, "
        f"{len(report.moved_frozen_attention)} with frozen attention"
    )
    return report
