import enum


class BlockKind(str, enum.Enum):
    CHANNEL_NL = "channel_nl"
    SPATIAL_NL = "spatial_nl"
    FLA = "fla"
    DUAL_NL = "dual_nl"
    CS_NL = "cs_nl"


class TaskKind(str, enum.Enum):
    IDENTITY = "identity"
    CHANNEL_MIX = "channel_mix"
    SPATIAL_MIX = "spatial_mix"
    FULL_MIX = "full_mix"


class Subcommand(str, enum.Enum):
    FORWARD = "forward"
    GRADCHECK = "gradcheck"
    COST = "cost"
    VERIFY = "verify"
    TRAIN = "train"
    TABLE4 = "table4"


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    HUMAN = "human"


class ExitCode(enum.IntEnum):
    OK = 0
    VERIFICATION_FAILED = 2
    USAGE = 3
    IO = 4


class Stencil(str, enum.Enum):
    CENTRAL = "central"
    FIVE_POINT = "five_point"


class CostTerm(str, enum.Enum):
    AFFINITY = "affinity"
    AGGREGATION = "aggregation"
    PROJECTIONS = "projections"
    POOLING = "pooling"
    SOFTMAX = "softmax"


# Row order used by sweeps, CSV output and the comparison report.
KIND_ORDER = (
    BlockKind.CHANNEL_NL,
    BlockKind.SPATIAL_NL,
    BlockKind.DUAL_NL,
    BlockKind.CS_NL,
    BlockKind.FLA,
)

COMPOSITE_KINDS = frozenset({BlockKind.DUAL_NL, BlockKind.CS_NL})

# 3 x 768 x 768 input, 1/8 backbone stride, 512-channel reduction.
ANCHOR_CHANNELS = 512
ANCHOR_HEIGHT = 96
ANCHOR_WIDTH = 96

# Published reference figures at the anchor shape: (group, GFLOPs, memory MB).
PUBLISHED_REFERENCE = {
    BlockKind.CHANNEL_NL: ("channel-only", 9.66, 40),
    BlockKind.SPATIAL_NL: ("spatial-only", 103.90, 1320),
    BlockKind.DUAL_NL: ("channel-spatial", 113.56, 1378),
    BlockKind.CS_NL: ("channel-spatial", 113.56, 1378),
    BlockKind.FLA: ("channel-spatial", 19.37, 436),
}

FLT1_MAGIC = b"FLT1"
FLT1_VERSION = 1
FLT1_MAX_RANK = 8
FLT1_DTYPE_F32 = 0
FLT1_DTYPE_F64 = 1

MANIFEST_FILE = "manifest.txt"
