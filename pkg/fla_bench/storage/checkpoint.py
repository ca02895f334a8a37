"""Parameter checkpoints: a directory of FLT1 tensors plus a text manifest.

manifest.txt:
    kind fla
    channels 4
    reduction 1
    param fla.linear_w.weight fla.linear_w.weight.flt
    ...
"""

from __future__ import annotations

from pathlib import Path

from ..constants import FLT1_DTYPE_F64, MANIFEST_FILE, BlockKind
from ..exceptions import ConfigurationError, FormatError
from ..logging_utils import get_logger
from ..services.blocks.params import BlockParams
from .flt1 import read_tensor, write_tensor

logger = get_logger(__name__)


def save_checkpoint(
    directory: str | Path, params: BlockParams, dtype: int = FLT1_DTYPE_F64
) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise FormatError(f"cannot create {directory}: {e}") from e

    lines = [
        f"kind {params.kind.value}",
        f"channels {params.channels}",
        f"reduction {params.reduction}",
    ]
    for name in params.names():
        file_name = f"{name}.flt"
        write_tensor(directory / file_name, params[name], dtype)
        lines.append(f"param {name} {file_name}")

    manifest = directory / MANIFEST_FILE
    try:
        manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot write {manifest}: {e}") from e
    logger.info(
        f"Saved {len(params.names())} {params.kind.value} tensors to {directory}"
    )
    return manifest


def load_checkpoint(directory: str | Path) -> BlockParams:
    directory = Path(directory)
    manifest = directory / MANIFEST_FILE
    try:
        text = manifest.read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read {manifest}: {e}") from e

    header: dict[str, str] = {}
    files: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] == "param" and len(fields) == 3:
            files[fields[1]] = fields[2]
        elif fields[0] in ("kind", "channels", "reduction") and len(fields) == 2:
            header[fields[0]] = fields[1]
        else:
            raise FormatError(
                f"{manifest}: unrecognized line {number}: {raw!r}",
                context={"line": number},
            )

    try:
        kind = BlockKind(header["kind"])
        channels = int(header["channels"])
        reduction = int(header.get("reduction", "1"))
    except (KeyError, ValueError) as e:
        raise FormatError(f"{manifest}: incomplete header ({e})") from e

    tensors = {}
    for name, file_name in files.items():
        tensors[name], _ = read_tensor(directory / file_name)
    try:
        return BlockParams(kind, channels, reduction, tensors)
    except ConfigurationError as e:
        raise FormatError(f"{manifest}: {e.message}", context=e.context) from e
