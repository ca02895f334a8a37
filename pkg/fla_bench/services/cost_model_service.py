"""Analytic FLOPs and activation-memory model for every block kind."""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import (
    Callable,
    Iterable,
    List,
    Sequence,
    TextIO,
)

from ..constants import (
    KIND_ORDER,
    BlockKind,
    CostTerm,
)
from ..logging_utils import (
    get_logger,
)
from ..models import (
    CostConfig,
    CostReport,
)
from .blocks.params import (
    largest_divisor_at_most,
    uses_reduction,
)

logger = get_logger(__name__)

COST_CSV_HEADER = (
    "kind",
    "C",
    "H",
    "W",
    "r",
    "flops_total",
    "flops_affinity",
    "flops_aggregation",
    "flops_projections",
    "flops_other",
    "attn_elements",
    "activation_bytes_peak",
)

SOFTMAX_OPS_PER_ELEMENT = 3
POOLING_OPS_PER_ELEMENT = 1


@dataclass(frozen=True)
class MemoryEvent:
    """One step of a forward liveness schedule; ``scalars`` is 0 for frees."""

    action: str
    name: str
    scalars: int = 0

    def describe(self) -> str:
        if self.action == "alloc":
            return f"+{self.name}:{self.scalars}"
        return f"-{self.name}"


def _alloc(name: str, scalars: int) -> MemoryEvent:
    return MemoryEvent("alloc", name, scalars)


def _free(*names: str) -> List[MemoryEvent]:
    return [MemoryEvent("free", n) for n in names]


def peak_liveness(events: Iterable[MemoryEvent], resident: int = 0) -> int:
    """Largest live total, sampled after every allocation."""
    live: dict[str, int] = {}
    peak = resident
    for event in events:
        if event.action == "alloc":
            if event.name in live:
                raise ValueError(f"{event.name} allocated twice")
            live[event.name] = event.scalars
            peak = max(peak, resident + sum(live.values()))
        else:
            if event.name not in live:
                raise ValueError(f"{event.name} freed before allocation")
            del live[event.name]
    return peak


class CostModelService:
    def __init__(
        self,
        get_settings: Callable,
    ):
        self.get_settings = get_settings

    @property
    def threads(self) -> int:
        return self.get_settings().threads

    def estimate(self, kind: BlockKind, cfg: CostConfig) -> CostReport:
        kind = BlockKind(kind)
        if kind in (BlockKind.DUAL_NL, BlockKind.CS_NL):
            flops = self._add_terms(
                self._flops(BlockKind.CHANNEL_NL, cfg),
                self._flops(BlockKind.SPATIAL_NL, cfg),
            )
        else:
            flops = self._flops(kind, cfg)
        events = self.schedule(kind, cfg)
        peak = peak_liveness(events, resident=self._positions_volume(cfg))
        return CostReport(
            kind=kind,
            config=cfg,
            flops_by_term=flops,
            activation_bytes_peak=peak * cfg.bytes_per_scalar,
            attention_map_elements=self._attention_elements(kind, cfg),
            schedule=tuple(e.describe() for e in events),
        )

    def _flops(self, kind: BlockKind, cfg: CostConfig) -> dict[CostTerm, int]:
        c, h, w = cfg.channels, cfg.height, cfg.width
        positions = cfg.positions
        mac = cfg.flops_per_mac
        terms = {term: 0 for term in CostTerm}

        if kind == BlockKind.CHANNEL_NL:
            terms[CostTerm.AFFINITY] = mac * c * c * positions
            terms[CostTerm.AGGREGATION] = mac * c * c * positions
            terms[CostTerm.SOFTMAX] = SOFTMAX_OPS_PER_ELEMENT * c * c
        elif kind == BlockKind.SPATIAL_NL:
            reduced = c // cfg.reduction
            terms[CostTerm.PROJECTIONS] = mac * positions * (2 * reduced * c + c * c)
            terms[CostTerm.AFFINITY] = mac * positions * positions * reduced
            terms[CostTerm.AGGREGATION] = mac * positions * positions * c
            terms[CostTerm.SOFTMAX] = SOFTMAX_OPS_PER_ELEMENT * positions * positions
        elif kind == BlockKind.FLA:
            # H row slices of width W plus W column slices of height H
            slice_volume = h * w + w * h
            terms[CostTerm.AFFINITY] = mac * c * c * slice_volume
            terms[CostTerm.AGGREGATION] = mac * c * c * slice_volume
            terms[CostTerm.POOLING] = POOLING_OPS_PER_ELEMENT * 2 * c * positions
            terms[CostTerm.PROJECTIONS] = mac * c * c * (h + w)
            terms[CostTerm.SOFTMAX] = SOFTMAX_OPS_PER_ELEMENT * (h + w) * c * c
        else:
            raise ValueError(f"no single-block cost model for {kind.value}")

        if not cfg.include_projections:
            terms[CostTerm.PROJECTIONS] = 0
        if not cfg.include_softmax:
            terms[CostTerm.SOFTMAX] = 0
        return terms

    @staticmethod
    def _add_terms(*parts: dict[CostTerm, int]) -> dict[CostTerm, int]:
        return {term: sum(p[term] for p in parts) for term in CostTerm}

    @staticmethod
    def _positions_volume(cfg: CostConfig) -> int:
        return cfg.channels * cfg.positions

    @staticmethod
    def _attention_elements(kind: BlockKind, cfg: CostConfig) -> int:
        c = cfg.channels
        channel = c * c
        spatial = cfg.positions * cfg.positions
        return {
            BlockKind.CHANNEL_NL: channel,
            BlockKind.SPATIAL_NL: spatial,
            BlockKind.FLA: (cfg.height + cfg.width) * c * c,
            BlockKind.DUAL_NL: channel + spatial,
            BlockKind.CS_NL: channel + spatial,
        }[kind]

    def schedule(self, kind: BlockKind, cfg: CostConfig) -> List[MemoryEvent]:
        """Forward liveness schedule; the input tensor is resident and not listed."""
        volume = self._positions_volume(cfg)
        if kind == BlockKind.CHANNEL_NL:
            return self._channel_events(cfg, "") + [
                _alloc("out", volume),
                *_free("ctx"),
            ]
        if kind == BlockKind.SPATIAL_NL:
            return self._spatial_events(cfg, "") + [
                _alloc("out", volume),
                *_free("ctx"),
            ]
        if kind == BlockKind.FLA:
            return self._fla_events(cfg)
        # Both composites hold the channel output while the spatial pass runs
        head = self._channel_events(cfg, "channel.") + [
            _alloc("channel.out", volume),
            *_free("channel.ctx"),
        ]
        tail = self._spatial_events(cfg, "spatial.") + [
            _alloc("out", volume),
            *_free("spatial.ctx", "channel.out"),
        ]
        return head + tail

    def _channel_events(self, cfg: CostConfig, prefix: str) -> List[MemoryEvent]:
        c = cfg.channels
        return [
            _alloc(f"{prefix}logits", c * c),
            _alloc(f"{prefix}attention", c * c),
            *_free(f"{prefix}logits"),
            _alloc(f"{prefix}ctx", self._positions_volume(cfg)),
            *_free(f"{prefix}attention"),
        ]

    def _spatial_events(self, cfg: CostConfig, prefix: str) -> List[MemoryEvent]:
        positions = cfg.positions
        reduced = cfg.channels // cfg.reduction
        volume = self._positions_volume(cfg)
        return [
            _alloc(f"{prefix}query", reduced * positions),
            _alloc(f"{prefix}key", reduced * positions),
            _alloc(f"{prefix}value", volume),
            _alloc(f"{prefix}logits", positions * positions),
            *_free(f"{prefix}query", f"{prefix}key"),
            _alloc(f"{prefix}attention", positions * positions),
            *_free(f"{prefix}logits"),
            _alloc(f"{prefix}ctx", volume),
            *_free(f"{prefix}attention", f"{prefix}value"),
        ]

    def _fla_events(self, cfg: CostConfig) -> List[MemoryEvent]:
        c, h, w = cfg.channels, cfg.height, cfg.width
        volume = self._positions_volume(cfg)
        events = [
            _alloc("pooled_w", c * w),
            _alloc("pooled_h", c * h),
            _alloc("prior_w", c * w),
            *_free("pooled_w"),
            _alloc("prior_h", c * h),
            *_free("pooled_h"),
        ]
        # Row group then column group; keys are views of the slices
        for group, slices, prior in (("rows", h, "prior_w"), ("cols", w, "prior_h")):
            events += [
                _alloc(f"{group}.value", volume),
                _alloc(f"{group}.logits", slices * c * c),
                _alloc(f"{group}.attention", slices * c * c),
                *_free(f"{group}.logits", prior),
                _alloc(f"{group}.ctx", volume),
                *_free(f"{group}.attention", f"{group}.value"),
            ]
            if group == "rows":
                events += [_alloc("context", volume), *_free("rows.ctx")]
            else:
                events += _free("cols.ctx")
        events += [_alloc("out", volume), *_free("context")]
        return events

    def config_for(self, shape: Sequence[int], **overrides) -> CostConfig:
        """CostConfig at ``shape`` with the configured reduction, lowered until it divides C."""
        c, h, w = shape
        reduction = overrides.pop(
            "reduction", largest_divisor_at_most(c, self.get_settings().reduction)
        )
        return CostConfig(channels=c, height=h, width=w, reduction=reduction, **overrides)

    def sweep(
        self,
        kinds: Iterable[BlockKind],
        shapes: Iterable[Sequence[int]],
        threads: int | None = None,
    ) -> List[CostReport]:
        """Reports ordered kind-major (table order), then by shape."""
        wanted = {BlockKind(k) for k in kinds}
        ordered_kinds = [k for k in KIND_ORDER if k in wanted]
        ordered_shapes = sorted({tuple(s) for s in shapes})
        cells = [(k, s) for k in ordered_kinds for s in ordered_shapes]
        if not cells:
            return []
        workers = max(1, min(threads or self.threads, len(cells)))
        logger.info(f"Cost sweep over {len(cells)} cells with {workers} threads")
        with ThreadPoolExecutor(max_workers=workers) as executor:
            # map preserves submission order whatever the completion order
            return list(
                executor.map(
                    lambda cell: self.estimate(cell[0], self.config_for(cell[1])),
                    cells,
                )
            )

    def write_csv(self, reports: Iterable[CostReport], stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(COST_CSV_HEADER)
        for report in reports:
            cfg = report.config
            terms = report.flops_by_term
            writer.writerow(
                [
                    report.kind.value,
                    cfg.channels,
                    cfg.height,
                    cfg.width,
                    cfg.reduction if uses_reduction(report.kind) else "",
                    report.flops_total,
                    terms[CostTerm.AFFINITY],
                    terms[CostTerm.AGGREGATION],
                    terms[CostTerm.PROJECTIONS],
                    terms[CostTerm.POOLING] + terms[CostTerm.SOFTMAX],
                    report.attention_map_elements,
                    report.activation_bytes_peak,
                ]
            )

    def log_summary(self, reports: Sequence[CostReport]) -> None:
        for report in reports:
            cfg = report.config
            logger.debug(
                f"{report.kind.value} {cfg.channels}x{cfg.height}x{cfg.width}: "
                f"{report.gflops:.2f} GFLOPs, {report.activation_mb:.1f} MB peak"
            )
