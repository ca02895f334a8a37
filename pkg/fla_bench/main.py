import argparse
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from . import __version__ as version, APP_TITLE
from .commands import cost, forward, gradcheck, table4, train, verify
from .commands.common import common_flags, parse_kinds, parse_shapes
from .constants import ExitCode, Subcommand
from .context import BenchContext
from .dependencies import get_settings
from .exceptions import (
    ConfigurationError,
    DimensionError,
    DivergenceError,
    FlaBenchError,
    FormatError,
    OracleRefusalError,
    UsageError,
)
from .logging_utils import get_logger, set_level
from .models import BenchConfig

logger = get_logger(__name__)

COMMANDS = {
    Subcommand.FORWARD: forward,
    Subcommand.GRADCHECK: gradcheck,
    Subcommand.COST: cost,
    Subcommand.VERIFY: verify,
    Subcommand.TRAIN: train,
    Subcommand.TABLE4: table4,
}


class StrictArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of printing usage and exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _create_parser() -> argparse.ArgumentParser:
    parser = StrictArgumentParser(
        prog="fla-bench",
        description=f"{APP_TITLE}: non-local attention blocks, verification and cost model",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {version}")
    subparsers = parser.add_subparsers(
        dest="subcommand", required=True, parser_class=StrictArgumentParser
    )
    _register_commands(subparsers)
    return parser


def _register_commands(subparsers) -> None:
    """Register every subcommand with the shared flags."""
    parents = [common_flags()]
    for module in COMMANDS.values():
        module.register(subparsers, parents)


def _bench_config(args) -> BenchConfig:
    subcommand = Subcommand(args.subcommand)
    seed = args.seed if args.seed is not None else get_settings().seed
    return BenchConfig(
        subcommand=subcommand,
        kinds=parse_kinds(args.kind),
        shapes=parse_shapes(args.shape, COMMANDS[subcommand].DEFAULT_SHAPES),
        seed=seed,
        repetitions=args.reps,
        output=args.out,
        format=args.format,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _create_parser().parse_args(argv)
        config = _bench_config(args)
    except UsageError as e:
        logger.error(e.message)
        return ExitCode.USAGE
    except ValidationError as e:
        logger.error(f"Invalid arguments: {e}")
        return ExitCode.USAGE

    set_level(get_settings().log_level)
    context = BenchContext(seed=config.seed)
    handler = COMMANDS[config.subcommand].handle
    try:
        return int(handler(args, config, context))
    except (UsageError, ConfigurationError, DimensionError, OracleRefusalError) as e:
        logger.error(e.message)
        return ExitCode.USAGE
    except ValidationError as e:
        logger.error(f"Invalid arguments: {e}")
        return ExitCode.USAGE
    except FormatError as e:
        logger.error(e.message)
        return ExitCode.IO
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        return ExitCode.IO
    except DivergenceError as e:
        logger.error(e.message)
        return ExitCode.VERIFICATION_FAILED
    except FlaBenchError as e:
        logger.error(f"{config.subcommand.value} failed: {e.message}", exc_info=True)
        return ExitCode.VERIFICATION_FAILED


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
