"""Flags, output handling and table rendering shared by every subcommand."""

import argparse
import sys
from contextlib import contextmanager
from typing import (
    Iterator,
    List,
    Optional,
    Sequence,
    TextIO,
)

from pydantic_core import PydanticCustomError
from rich.console import Console
from rich.table import Table

from ..constants import (
    KIND_ORDER,
    BlockKind,
    OutputFormat,
)
from ..exceptions import UsageError
from ..models import parse_shape


def common_flags() -> argparse.ArgumentParser:
    """Parent parser carrying the flags every subcommand accepts."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--kind",
        action="append",
        metavar="KIND[,KIND...]",
        help="block kinds to run (repeatable or comma separated; default all)",
    )
    parent.add_argument(
        "--shape",
        action="append",
        metavar="CxHxW",
        help="input shape (repeatable)",
    )
    parent.add_argument("--seed", type=int, default=None)
    parent.add_argument("--reps", type=int, default=3, help="timing repetitions")
    parent.add_argument("--out", default=None, help="output path (default stdout)")
    parent.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=OutputFormat.CSV.value,
    )
    return parent


def parse_kinds(values: Optional[Sequence[str]]) -> List[BlockKind]:
    """``None`` selects every kind; an empty string selects none."""
    if values is None:
        return list(KIND_ORDER)
    chosen = set()
    for value in values:
        for token in value.split(","):
            token = token.strip()
            if not token:
                continue
            try:
                chosen.add(BlockKind(token))
            except ValueError:
                raise UsageError(
                    f"unknown kind '{token}' (expected one of "
                    f"{', '.join(k.value for k in KIND_ORDER)})"
                )
    return [k for k in KIND_ORDER if k in chosen]


def parse_shapes(
    values: Optional[Sequence[str]], default: Sequence[tuple[int, int, int]]
) -> List[tuple[int, int, int]]:
    if not values:
        return list(default)
    shapes = []
    for value in values:
        try:
            shapes.append(parse_shape(value))
        except PydanticCustomError as e:
            raise UsageError(str(e))
    return shapes


@contextmanager
def open_output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", newline="", encoding="utf-8") as stream:
        yield stream


def render_table(
    title: str,
    header: Sequence[str],
    rows: Sequence[Sequence[object]],
    stream: TextIO,
) -> None:
    table = Table(title=title)
    for column in header:
        table.add_column(column, justify="right" if column != "kind" else "left")
    for row in rows:
        table.add_row(*("" if v is None else str(v) for v in row))
    Console(file=stream, width=160).print(table)
