import argparse

from ..constants import (
    ANCHOR_CHANNELS,
    ANCHOR_HEIGHT,
    ANCHOR_WIDTH,
    CostTerm,
    ExitCode,
    OutputFormat,
)
from ..context import BenchContext
from ..models import BenchConfig
from .common import open_output, render_table

DEFAULT_SHAPES = [(ANCHOR_CHANNELS, ANCHOR_HEIGHT, ANCHOR_WIDTH)]
HUMAN_HEADER = (
    "kind",
    "C",
    "H",
    "W",
    "r",
    "GFLOPs",
    "affinity G",
    "aggregation G",
    "attn elements",
    "activation MB",
)


def register(subparsers, parents) -> argparse.ArgumentParser:
    return subparsers.add_parser(
        "cost", parents=parents, help="analytic FLOPs / activation-memory sweep"
    )


def handle(args, config: BenchConfig, context: BenchContext) -> ExitCode:
    cost_model = context.create_services()["cost_model"]
    reports = cost_model.sweep(config.kinds, config.shapes)
    cost_model.log_summary(reports)

    with open_output(config.output) as stream:
        if config.format == OutputFormat.HUMAN:
            rows = [
                (
                    r.kind.value,
                    r.config.channels,
                    r.config.height,
                    r.config.width,
                    r.config.reduction,
                    f"{r.gflops:.3f}",
                    f"{r.flops_by_term[CostTerm.AFFINITY] / 1e9:.3f}",
                    f"{r.flops_by_term[CostTerm.AGGREGATION] / 1e9:.3f}",
                    r.attention_map_elements,
                    f"{r.activation_mb:.1f}",
                )
                for r in reports
            ]
            render_table(
                "cost model",
                HUMAN_HEADER,
                rows,
                stream,
            )
        else:
            cost_model.write_csv(reports, stream)
    return ExitCode.OK
