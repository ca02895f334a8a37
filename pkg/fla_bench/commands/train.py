import argparse
import csv

from ..constants import (
    ExitCode,
    OutputFormat,
    TaskKind,
)
from ..context import BenchContext
from ..exceptions import DivergenceError, UsageError
from ..logging_utils import get_logger
from ..models import BenchConfig, TaskSpec
from .common import open_output, render_table

logger = get_logger(__name__)

DEFAULT_SHAPES = [(4, 6, 6)]
SUMMARY_HEADER = ("kind", "seed", "initial_loss", "final_loss", "loss_ratio", "diverged")


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        "train", parents=parents, help="fit a block to a synthetic mixing task"
    )
    parser.add_argument(
        "--task",
        choices=[t.value for t in TaskKind],
        default=TaskKind.FULL_MIX.value,
    )
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument(
        "--trials",
        type=int,
        default=None,
        help="compare kinds over this many consecutive seeds instead of one loss curve",
    )
    return parser


def _task_spec(args, config: BenchConfig) -> TaskSpec:
    if len(config.shapes) != 1:
        raise UsageError("train takes a single --shape")
    channels, height, width = config.shapes[0]
    fields = dict(
        kind=TaskKind(args.task),
        channels=channels,
        height=height,
        width=width,
        seed=config.seed,
    )
    if args.steps is not None:
        fields["steps"] = args.steps
    if args.lr is not None:
        fields["learning_rate"] = args.lr
    return TaskSpec(**fields)


def handle(args, config: BenchConfig, context: BenchContext) -> ExitCode:
    spec = _task_spec(args, config)
    trainer = context.create_services()["trainer"]

    if args.trials is not None:
        if args.trials < 1:
            raise UsageError("--trials must be at least 1")
        return _compare(trainer, spec, config, args.trials)

    curves = []
    diverged = False
    for kind in config.kinds:
        try:
            report = trainer.run_task(spec, kind, strict=True)
        except DivergenceError as e:
            report = e.report
            diverged = True
        curves.append(report)

    with open_output(config.output) as stream:
        if config.format == OutputFormat.HUMAN:
            rows = [
                (
                    r.block.value,
                    spec.seed,
                    repr(r.losses[0]) if r.losses else "",
                    repr(r.losses[-1]) if r.losses else "",
                    f"{r.loss_ratio:.3e}",
                    r.diverged,
                )
                for r in curves
            ]
            render_table(f"train {spec.kind.value}", SUMMARY_HEADER, rows, stream)
        elif len(curves) == 1:
            trainer.write_loss_csv(curves[0], stream)
        else:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(["kind", "step", "loss"])
            for report in curves:
                for step, loss in enumerate(report.losses):
                    writer.writerow([report.block.value, step, repr(loss)])

    return ExitCode.VERIFICATION_FAILED if diverged else ExitCode.OK


def _compare(trainer, spec: TaskSpec, config: BenchConfig, trials: int) -> ExitCode:
    seeds = range(spec.seed, spec.seed + trials)
    grouped = trainer.compare(spec, config.kinds, seeds)
    rows = [
        (
            kind.value,
            report.task.seed,
            repr(report.losses[0]) if report.losses else "",
            repr(report.losses[-1]) if report.losses else "",
            repr(report.loss_ratio),
            report.diverged,
        )
        for kind, reports in grouped.items()
        for report in reports
    ]
    with open_output(config.output) as stream:
        if config.format == OutputFormat.HUMAN:
            render_table(f"compare {spec.kind.value}", SUMMARY_HEADER, rows, stream)
        else:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(SUMMARY_HEADER)
            writer.writerows(rows)
    return ExitCode.OK
