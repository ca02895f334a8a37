from functools import lru_cache

from .constants import (
    BlockKind,
)
from .services.blocks.base import (
    BaseBlock,
)
from .services.blocks.channel_nl import (
    ChannelNLBlock,
)
from .services.blocks.composite import (
    CSNLBlock,
    DualNLBlock,
)
from .services.blocks.fla import (
    FLABlock,
    SlicePath,
)
from .services.blocks.spatial_nl import (
    SpatialNLBlock,
)
from .services.cost_model_service import (
    CostModelService,
)
from .services.timing_service import (
    TimingService,
)
from .services.trainer_service import (
    TrainerService,
)
from .services.verify_service import (
    VerifyService,
)
from .settings import (
    Settings,
)


@lru_cache
def get_settings():
    return Settings()


def get_block(
    kind: BlockKind,
    softmax_axis: int = -1,
    path: SlicePath = SlicePath.AUTO,
) -> BaseBlock:
    kind = BlockKind(kind)
    if kind == BlockKind.CHANNEL_NL:
        return ChannelNLBlock(softmax_axis)
    if kind == BlockKind.SPATIAL_NL:
        return SpatialNLBlock(softmax_axis)
    if kind == BlockKind.FLA:
        return FLABlock(softmax_axis, path=path)
    if kind == BlockKind.DUAL_NL:
        return DualNLBlock(softmax_axis)
    if kind == BlockKind.CS_NL:
        return CSNLBlock(softmax_axis)
    raise ValueError(f"Unknown block kind {kind}")


def get_cost_model_service():
    return CostModelService(get_settings=get_settings)


def get_trainer_service():
    return TrainerService(get_settings=get_settings, get_block=get_block)


def get_verify_service():
    return VerifyService(get_settings=get_settings, get_block=get_block)


def get_timing_service():
    return TimingService(get_settings=get_settings, get_block=get_block)
