"""Side-by-side comparison of the block kinds at the anchor configuration.

GFLOPs, attention elements and activation memory are analytic at the anchor
shape; ``wall_clock_ms`` is measured at the (much smaller) timing shape and is
informational only.
"""

import argparse
import csv

from ..constants import (
    ANCHOR_CHANNELS,
    ANCHOR_HEIGHT,
    ANCHOR_WIDTH,
    PUBLISHED_REFERENCE,
    BlockKind,
    ExitCode,
    OutputFormat,
)
from ..context import BenchContext
from ..logging_utils import get_logger
from ..models import BenchConfig, parse_shape
from .common import open_output, render_table

logger = get_logger(__name__)

DEFAULT_SHAPES: list = []
ANCHOR_SHAPE = (ANCHOR_CHANNELS, ANCHOR_HEIGHT, ANCHOR_WIDTH)
HEADER = (
    "kind",
    "group",
    "gflops",
    "attn_elements",
    "activation_mb",
    "reference_gflops",
    "reference_mb",
    "wall_clock_ms",
)


def register(subparsers, parents) -> argparse.ArgumentParser:
    return subparsers.add_parser(
        "table4", parents=parents, help="FLOPs / memory comparison at the anchor shape"
    )


def build_rows(config: BenchConfig, context: BenchContext) -> list[tuple]:
    services = context.create_services()
    cost_model = services["cost_model"]
    timing = services["timing"]
    timing_shape = (
        config.shapes[0] if config.shapes else parse_shape(context.get_settings().timing_shape)
    )

    reports = {
        kind: cost_model.estimate(kind, cost_model.config_for(ANCHOR_SHAPE))
        for kind in config.kinds
    }
    rows = []
    for kind, report in reports.items():
        group, reference_gflops, reference_mb = PUBLISHED_REFERENCE[kind]
        elapsed = timing.median_forward_ms(kind, timing_shape, config.repetitions, config.seed)
        rows.append(
            (
                kind.value,
                group,
                f"{report.gflops:.2f}",
                report.attention_map_elements,
                f"{report.activation_mb:.1f}",
                f"{reference_gflops:.2f}",
                reference_mb,
                f"{elapsed:.3f}",
            )
        )

    ref = PUBLISHED_REFERENCE
    fla = reports.get(BlockKind.FLA)
    dual = reports.get(BlockKind.DUAL_NL)
    channel = reports.get(BlockKind.CHANNEL_NL)
    if fla and dual:
        rows.append(
            (
                "fla/dual_nl",
                "ratio",
                f"{fla.flops_total / dual.flops_total:.4f}",
                f"{fla.attention_map_elements / dual.attention_map_elements:.4f}",
                f"{fla.activation_bytes_peak / dual.activation_bytes_peak:.4f}",
                f"{ref[BlockKind.FLA][1] / ref[BlockKind.DUAL_NL][1]:.4f}",
                f"{ref[BlockKind.FLA][2] / ref[BlockKind.DUAL_NL][2]:.4f}",
                "",
            )
        )
    if fla and channel:
        # What FLA pays on top of Channel NL for its spatial interaction
        rows.append(
            (
                "fla-channel_nl",
                "increment",
                f"{fla.gflops - channel.gflops:.2f}",
                fla.attention_map_elements - channel.attention_map_elements,
                f"{fla.activation_mb - channel.activation_mb:.1f}",
                f"{ref[BlockKind.FLA][1] - ref[BlockKind.CHANNEL_NL][1]:.2f}",
                ref[BlockKind.FLA][2] - ref[BlockKind.CHANNEL_NL][2],
                "",
            )
        )
    return rows


def handle(args, config: BenchConfig, context: BenchContext) -> ExitCode:
    rows = build_rows(config, context)
    with open_output(config.output) as stream:
        if config.format == OutputFormat.HUMAN:
            render_table("anchor comparison", HEADER, rows, stream)
        else:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(HEADER)
            writer.writerows(rows)
    return ExitCode.OK
