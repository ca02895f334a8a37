import argparse
import csv

from ..constants import (
    BlockKind,
    ExitCode,
    OutputFormat,
)
from ..context import BenchContext
from ..core import ops
from ..exceptions import UsageError
from ..logging_utils import get_logger
from ..models import BenchConfig
from ..services.blocks.params import (
    init_params,
    largest_divisor_at_most,
)
from ..storage.checkpoint import load_checkpoint
from ..storage.flt1 import read_tensor, write_tensor
from .common import open_output, render_table

logger = get_logger(__name__)

DEFAULT_SHAPES = [(8, 8, 8)]
HEADER = ("kind", "C", "H", "W", "output_sum_squares", "wall_clock_ms")


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "forward", parents=parents, help="run block forwards and time them"
    )
    parser.add_argument("--input", default=None, help="FLT1 input tensor")
    parser.add_argument("--params", default=None, help="parameter checkpoint directory")
    return parser


def handle(args, config: BenchConfig, context: BenchContext) -> ExitCode:
    if args.input is not None:
        return _forward_file(args, config, context)

    settings = context.get_settings()
    timing = context.create_services()["timing"]
    rows = []
    for kind in config.kinds:
        for shape in config.shapes:
            channels = shape[0]
            params = init_params(
                kind,
                channels,
                context.rng,
                reduction=largest_divisor_at_most(channels, settings.reduction),
            )
            f_in = context.rng.uniform(shape)
            output = context.get_block(kind).forward(params, f_in).output
            elapsed = timing.median_forward_ms(kind, shape, config.repetitions, config.seed)
            rows.append(
                (
                    kind.value,
                    *shape,
                    repr(ops.sum_squares(output).item()),
                    f"{elapsed:.3f}",
                )
            )

    with open_output(config.output) as stream:
        if config.format == OutputFormat.HUMAN:
            render_table("forward", HEADER, rows, stream)
        else:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(HEADER)
            writer.writerows(rows)
    return ExitCode.OK


def _forward_file(args, config: BenchConfig, context: BenchContext) -> ExitCode:
    """Read one FLT1 tensor, run one block on it and write the output as FLT1."""
    if config.output is None:
        raise UsageError("forward --input needs --out for the output tensor")
    f_in, dtype = read_tensor(args.input)
    if f_in.rank != 3:
        raise UsageError(f"{args.input} holds shape {list(f_in.shape)}, expected C x H x W")

    if args.params is not None:
        params = load_checkpoint(args.params)
        kind = params.kind
    else:
        if len(config.kinds) != 1:
            raise UsageError("forward --input needs exactly one --kind or a --params checkpoint")
        kind = BlockKind(config.kinds[0])
        params = init_params(
            kind,
            f_in.shape[0],
            context.rng,
            reduction=largest_divisor_at_most(f_in.shape[0], context.get_settings().reduction),
        )

    output = context.get_block(kind).forward(params, f_in).output
    write_tensor(config.output, output, dtype)
    logger.info(f"Wrote {kind.value} output {list(output.shape)} to {config.output}")
    return ExitCode.OK
