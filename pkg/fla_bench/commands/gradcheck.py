import argparse
import csv

from ..constants import (
    ExitCode,
    OutputFormat,
    Stencil,
)
from ..context import BenchContext
from ..exceptions import UsageError
from ..logging_utils import get_logger
from ..models import BenchConfig
from ..services.blocks.params import (
    largest_divisor_at_most,
    random_params,
)
from ..services.verify_service import GRADCHECK_GAMMA, GRADCHECK_SHAPE
from .common import open_output, render_table

logger = get_logger(__name__)

DEFAULT_SHAPES = [GRADCHECK_SHAPE]
HEADER = (
    "kind",
    "C",
    "H",
    "W",
    "tensor",
    "max_rel_error",
    "max_abs_error",
    "worst_index",
)


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "gradcheck",
        parents=parents,
        help="compare tape gradients with finite differences",
    )
    parser.add_argument("--step", type=float, default=None, help="finite-difference step h")
    parser.add_argument(
        "--stencil",
        choices=[s.value for s in Stencil],
        default=None,
        help="finite-difference formula (default central)",
    )
    return parser


def handle(args, config: BenchConfig, context: BenchContext) -> ExitCode:
    settings = context.get_settings()
    step = args.step if args.step is not None else settings.grad_step
    stencil = Stencil(args.stencil) if args.stencil else settings.grad_stencil
    if step <= 0:
        raise UsageError(f"--step must be positive, got {step}")

    rows = []
    failed = []
    for kind in config.kinds:
        for shape in config.shapes:
            channels = shape[0]
            params = random_params(
                kind,
                channels,
                context.rng,
                reduction=largest_divisor_at_most(channels, 2),
                gamma=GRADCHECK_GAMMA,
            )
            f_in = context.rng.uniform(shape)
            report = context.get_block(kind).grad_check(params, f_in, step, stencil)
            for entry in report.entries:
                rows.append(
                    (
                        kind.value,
                        *shape,
                        entry.name,
                        repr(entry.max_rel_error),
                        repr(entry.max_abs_error),
                        entry.worst_index,
                    )
                )
            if not report.passed(settings.grad_tolerance):
                failed.append(kind.value)
            logger.info(
                f"{kind.value} {shape}: max rel error {report.max_rel_error:.3e}"
            )

    with open_output(config.output) as stream:
        if config.format == OutputFormat.HUMAN:
            render_table("gradcheck", HEADER, rows, stream)
        else:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(HEADER)
            writer.writerows(rows)

    if failed:
        logger.error(f"Gradient check failed for {', '.join(failed)}")
        return ExitCode.VERIFICATION_FAILED
    return ExitCode.OK
