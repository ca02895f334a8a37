import statistics
import time
from typing import (
    Callable,
    List,
    Sequence,
)

from ..constants import BlockKind
from ..core.tensor import Rng
from ..logging_utils import (
    get_logger,
)
from .blocks.base import BaseBlock
from .blocks.params import (
    init_params,
    largest_divisor_at_most,
)

logger = get_logger(__name__)


class TimingService:
    """Wall-clock forward timings; informational only, never part of golden output."""

    def __init__(
        self,
        get_settings: Callable,
        get_block: Callable[..., BaseBlock],
    ):
        self.get_settings = get_settings
        self.get_block = get_block

    @property
    def warmup(self) -> int:
        return self.get_settings().warmup

    def time_call(self, fn: Callable[[], object], repetitions: int) -> List[float]:
        """Milliseconds per call after the configured warm-up runs."""
        for _ in range(self.warmup):
            fn()
        samples = []
        for _ in range(repetitions):
            start = time.perf_counter()
            fn()
            samples.append((time.perf_counter() - start) * 1000.0)
        return samples

    def median_forward_ms(
        self,
        kind: BlockKind,
        shape: Sequence[int],
        repetitions: int,
        seed: int,
    ) -> float:
        channels, height, width = shape
        rng = Rng(seed)
        params = init_params(
            kind,
            channels,
            rng,
            reduction=largest_divisor_at_most(channels, self.get_settings().reduction),
        )
        f_in = rng.uniform(tuple(shape))
        block = self.get_block(kind)
        samples = self.time_call(lambda: block.forward(params, f_in), repetitions)
        median = statistics.median(samples)
        logger.debug(
            f"{BlockKind(kind).value} {channels}x{height}x{width}: median {median:.3f} ms over {repetitions} runs"
        )
        return median
