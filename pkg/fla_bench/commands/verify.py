import argparse

from ..constants import (
    ExitCode,
    OutputFormat,
)
from ..context import BenchContext
from ..logging_utils import get_logger
from ..models import BenchConfig
from .common import open_output, render_table

logger = get_logger(__name__)

DEFAULT_SHAPES: list = []

# Test hooks selectable through --inject-fault
FAULTS = {"softmax-axis": -2}


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "verify", parents=parents, help="run the self-verification suites"
    )
    parser.add_argument(
        "--trials", type=int, default=None, help="random cases per kind in the oracle suite"
    )
    parser.add_argument(
        "--inject-fault", choices=sorted(FAULTS), default=None, help=argparse.SUPPRESS
    )
    return parser


def handle(args, config: BenchConfig, context: BenchContext) -> ExitCode:
    softmax_axis = FAULTS[args.inject_fault] if args.inject_fault else -1
    if args.inject_fault:
        logger.warning(f"Injected fault: {args.inject_fault}")

    report = context.create_services()["verify"].run(
        config.seed,
        kinds=config.kinds,
        softmax_axis=softmax_axis,
        trials=args.trials,
    )

    with open_output(config.output) as stream:
        if config.format == OutputFormat.HUMAN:
            rows = [
                (s.suite, "pass" if s.passed else "fail", s.cases, repr(s.worst), s.detail)
                for s in report.suites
            ]
            render_table(
                f"verify seed={report.seed}",
                ("suite", "status", "cases", "worst", "detail"),
                rows,
                stream,
            )
        else:
            stream.write(report.render())

    if not report.passed:
        return ExitCode.VERIFICATION_FAILED
    return ExitCode.OK
