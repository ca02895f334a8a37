"""Self-verification suites behind ``fla-bench verify``.

Every suite is seeded and reports the worst deviation it saw, so two runs with
the same seed render byte-identical reports.
"""

from typing import (
    Callable,
    List,
    Sequence,
    Tuple,
)

import numpy as np

from ..constants import (
    KIND_ORDER,
    BlockKind,
)
from ..core.tensor import Rng, Tensor
from ..exceptions import FlaBenchError
from ..logging_utils import (
    get_logger,
)
from ..models import (
    SuiteResult,
    VerifyReport,
)
from ..oracle import (
    oracle_fla_attention,
    oracle_forward,
)
from .blocks.base import BaseBlock, ForwardTrace
from .blocks.fla import SlicePath
from .blocks.mixing import mixing_structure
from .blocks.params import (
    init_params,
    random_params,
    uses_reduction,
)

logger = get_logger(__name__)

GRADCHECK_SHAPE = (4, 3, 3)
GRADCHECK_GAMMA = 0.5
MIXING_SHAPE = (2, 3, 3)
STOCHASTIC_SHAPES = ((4, 3, 3), (3, 2, 4), (2, 5, 1))
MERGE_SHAPES = ((2, 2, 2), (3, 4, 4), (5, 5, 5))


def _divisors(n: int) -> List[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def _row_sum_error(maps: Sequence[Tensor]) -> float:
    worst = 0.0
    for attention in maps:
        sums = np.sum(attention.array, axis=-1)
        worst = max(worst, float(np.max(np.abs(sums - 1.0))))
    return worst


class VerifyService:
    def __init__(
        self,
        get_settings: Callable,
        get_block: Callable[..., BaseBlock],
    ):
        self.get_settings = get_settings
        self.get_block = get_block

    def run(
        self,
        seed: int,
        kinds: Sequence[BlockKind] = KIND_ORDER,
        softmax_axis: int = -1,
        trials: int | None = None,
    ) -> VerifyReport:
        kinds = [k for k in KIND_ORDER if k in set(kinds)]
        suites: List[Tuple[str, Callable[[], SuiteResult]]] = [
            ("oracle_equivalence", lambda: self.oracle_equivalence(seed, kinds, softmax_axis, trials)),
            ("stochasticity", lambda: self.stochasticity(seed, kinds, softmax_axis)),
            ("residual_identity", lambda: self.residual_identity(seed, kinds, softmax_axis)),
            ("merge_agreement", lambda: self.merge_agreement(seed, softmax_axis)),
            ("constant_input", lambda: self.constant_input(softmax_axis)),
            ("gradcheck", lambda: self.gradcheck(seed, kinds, softmax_axis)),
            ("mixing", lambda: self.mixing(seed, softmax_axis)),
        ]
        results = []
        for name, suite in suites:
            logger.info(f"Running suite {name}")
            try:
                result = suite()
            except FlaBenchError as e:
                logger.error(f"Suite {name} raised: {e.message}", exc_info=True)
                result = SuiteResult(
                    suite=name, passed=False, cases=0, worst=float("inf"),
                    detail=type(e).__name__,
                )
            results.append(result)
            logger.info(result.summary_line())
        return VerifyReport(seed=seed, suites=results)

    def _random_case(self, rng: Rng, kind: BlockKind, gamma: float | None = None):
        channels = rng.integers(1, 6)
        height = rng.integers(1, 5)
        width = rng.integers(1, 5)
        divisors = _divisors(channels)
        reduction = divisors[rng.integers(0, len(divisors) - 1)]
        params = random_params(kind, channels, rng, reduction=reduction, gamma=gamma)
        f_in = rng.uniform((channels, height, width))
        return params, f_in

    def oracle_equivalence(
        self,
        seed: int,
        kinds: Sequence[BlockKind],
        softmax_axis: int = -1,
        trials: int | None = None,
    ) -> SuiteResult:
        settings = self.get_settings()
        trials = trials or settings.verify_trials
        worst = 0.0
        cases = 0
        for index, kind in enumerate(kinds):
            rng = Rng(seed + 1000 * (index + 1))
            block = self.get_block(kind, softmax_axis=softmax_axis)
            for _ in range(trials):
                params, f_in = self._random_case(rng, kind)
                trace = block.forward(params, f_in)
                expected = oracle_forward(params, f_in, settings.oracle_max_scalars)
                worst = max(worst, trace.output.max_abs_diff(expected))
                if kind == BlockKind.FLA:
                    attention = oracle_fla_attention(params, f_in, settings.oracle_max_scalars)
                    worst = max(worst, trace.attention.max_abs_diff(attention))
                cases += 1
        return SuiteResult(
            suite="oracle_equivalence",
            passed=worst <= settings.oracle_tolerance,
            cases=cases,
            worst=worst,
        )

    def stochasticity(
        self, seed: int, kinds: Sequence[BlockKind], softmax_axis: int = -1
    ) -> SuiteResult:
        settings = self.get_settings()
        rng = Rng(seed)
        worst = 0.0
        cases = 0
        for kind in kinds:
            block = self.get_block(kind, softmax_axis=softmax_axis)
            for channels, height, width in STOCHASTIC_SHAPES:
                reduction = channels if uses_reduction(kind) else 1
                params = random_params(kind, channels, rng, reduction=reduction, gamma=1.0)
                trace = block.forward(params, rng.uniform((channels, height, width)))
                worst = max(worst, _row_sum_error(list(trace.attention_maps.values())))
                cases += 1
        return SuiteResult(
            suite="stochasticity",
            passed=worst <= settings.stochastic_tolerance,
            cases=cases,
            worst=worst,
        )

    def residual_identity(
        self, seed: int, kinds: Sequence[BlockKind], softmax_axis: int = -1
    ) -> SuiteResult:
        rng = Rng(seed + 1)
        failures = 0
        cases = 0
        worst = 0.0
        for kind in kinds:
            block = self.get_block(kind, softmax_axis=softmax_axis)
            for _ in range(10):
                params, f_in = self._random_case(rng, kind, gamma=0.0)
                output = block.forward(params, f_in).output
                if not output.identical(f_in):
                    failures += 1
                    worst = max(worst, output.max_abs_diff(f_in))
                cases += 1
        return SuiteResult(
            suite="residual_identity",
            passed=failures == 0,
            cases=cases,
            worst=worst,
            detail=f"failures:{failures}" if failures else "",
        )

    def merge_agreement(self, seed: int, softmax_axis: int = -1) -> SuiteResult:
        rng = Rng(seed + 2)
        merged = self.get_block(BlockKind.FLA, softmax_axis=softmax_axis, path=SlicePath.MERGED)
        grouped = self.get_block(BlockKind.FLA, softmax_axis=softmax_axis, path=SlicePath.GROUPED)
        failures = 0
        worst = 0.0
        for channels, height, width in MERGE_SHAPES:
            params = random_params(BlockKind.FLA, channels, rng, gamma=1.0)
            f_in = rng.uniform((channels, height, width))
            a: ForwardTrace = merged.forward(params, f_in)
            b: ForwardTrace = grouped.forward(params, f_in)
            if not (a.output.identical(b.output) and a.attention.identical(b.attention)):
                failures += 1
                worst = max(worst, a.output.max_abs_diff(b.output))
        return SuiteResult(
            suite="merge_agreement",
            passed=failures == 0,
            cases=len(MERGE_SHAPES),
            worst=worst,
        )

    def constant_input(self, softmax_axis: int = -1) -> SuiteResult:
        """Constant input with identity linears gives uniform 1/C maps."""
        block = self.get_block(BlockKind.FLA, softmax_axis=softmax_axis)
        worst = 0.0
        shapes = ((3, 4, 4), (4, 2, 5))
        for channels, height, width in shapes:
            params = init_params(BlockKind.FLA, channels, gamma=1.0)
            trace = block.forward(params, Tensor.full((channels, height, width), 0.75))
            worst = max(
                worst, float(np.max(np.abs(trace.attention.array - 1.0 / channels)))
            )
        return SuiteResult(
            suite="constant_input", passed=worst <= 1e-12, cases=len(shapes), worst=worst
        )

    def gradcheck(
        self, seed: int, kinds: Sequence[BlockKind], softmax_axis: int = -1
    ) -> SuiteResult:
        settings = self.get_settings()
        rng = Rng(seed + 3)
        channels, height, width = GRADCHECK_SHAPE
        worst = 0.0
        details = []
        for kind in kinds:
            block = self.get_block(kind, softmax_axis=softmax_axis)
            params = random_params(kind, channels, rng, reduction=2, gamma=GRADCHECK_GAMMA)
            f_in = rng.uniform((channels, height, width))
            report = block.grad_check(
                params, f_in, settings.grad_step, settings.grad_stencil
            )
            worst = max(worst, report.max_rel_error)
            if not report.passed(settings.grad_tolerance):
                details.append(f"{kind.value}:{report.worst.name}")
        return SuiteResult(
            suite="gradcheck",
            passed=not details,
            cases=len(kinds),
            worst=worst,
            detail=",".join(details),
        )

    def mixing(self, seed: int, softmax_axis: int = -1) -> SuiteResult:
        """FLA reaches the perturbed row and column; frozen Channel NL stays local."""
        rng = Rng(seed + 4)
        channels, height, width = MIXING_SHAPE
        f_in = rng.uniform(MIXING_SHAPE)
        source = (0, 0, 0)
        checks = []

        fla = self.get_block(BlockKind.FLA, softmax_axis=softmax_axis)
        fla_params = random_params(BlockKind.FLA, channels, rng, gamma=1.0)
        fla_report = mixing_structure(
            fla, fla.forward(fla_params, f_in), fla_params, f_in, source
        )
        checks.append(fla_report.reaches(0, width - 1))
        checks.append(fla_report.reaches(height - 1, 0))
        checks.append((0, width - 1) in fla_report.moved_prior_only)

        channel = self.get_block(BlockKind.CHANNEL_NL, softmax_axis=softmax_axis)
        channel_params = random_params(BlockKind.CHANNEL_NL, channels, rng, gamma=1.0)
        channel_report = mixing_structure(
            channel, channel.forward(channel_params, f_in), channel_params, f_in, source
        )
        checks.append(channel_report.moved_frozen_attention == [(0, 0)])
        checks.append(channel_report.moved_prior_only == [])

        failed = checks.count(False)
        return SuiteResult(
            suite="mixing",
            passed=failed == 0,
            cases=len(checks),
            worst=float(failed),
        )
