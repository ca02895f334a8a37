import csv
from concurrent.futures import ThreadPoolExecutor
from typing import (
    Callable,
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    TextIO,
    Tuple,
)

from ..autograd import functional as F
from ..autograd.tape import Tape
from ..constants import (
    BlockKind,
    TaskKind,
)
from ..core.tensor import Rng, Tensor
from ..exceptions import (
    DivergenceError,
    NonFiniteError,
)
from ..logging_utils import (
    get_logger,
)
from ..models import (
    TaskSpec,
    TrainReport,
)
from .blocks.base import BaseBlock, bind_params
from .blocks.params import (
    GAMMA_NAMES,
    BlockParams,
    init_params,
    largest_divisor_at_most,
)

logger = get_logger(__name__)

Batch = List[Tuple[Tensor, Tensor]]

# Which hidden operator produces the targets of each task
_HIDDEN_KINDS = {
    TaskKind.CHANNEL_MIX: BlockKind.CHANNEL_NL,
    TaskKind.SPATIAL_MIX: BlockKind.SPATIAL_NL,
    TaskKind.FULL_MIX: BlockKind.FLA,
}

MAX_HALVINGS = 10

# Hidden operators sit at the untrained parameters plus uniform noise of this half-width
HIDDEN_NOISE = 0.1
HIDDEN_GAMMA_RANGE = (0.75, 1.25)


class TrainerService:
    def __init__(
        self,
        get_settings: Callable,
        get_block: Callable[..., BaseBlock],
    ):
        self.get_settings = get_settings
        self.get_block = get_block

    @property
    def divergence_threshold(self) -> float:
        return self.get_settings().divergence_threshold

    def _reduction(self, channels: int) -> int:
        return largest_divisor_at_most(channels, self.get_settings().reduction)

    def build_batch(self, spec: TaskSpec) -> Batch:
        """Seeded inputs paired with the targets of the task's hidden operator."""
        shape = (spec.channels, spec.height, spec.width)
        # Wider inputs sharpen the hidden FLA maps past what one C x C map can imitate
        spread = 2.0 if spec.kind == TaskKind.FULL_MIX else 1.0
        rng = Rng(spec.seed)
        inputs = [rng.uniform(shape, -spread, spread) for _ in range(spec.batch)]
        if spec.kind == TaskKind.IDENTITY:
            return [(x, x) for x in inputs]

        hidden = self.hidden_params(spec)
        block = self.get_block(hidden.kind)
        return [(x, block.forward(hidden, x).output) for x in inputs]

    def hidden_params(self, spec: TaskSpec) -> Optional[BlockParams]:
        """Seeded random operator of the task's kind; ``None`` for the identity task."""
        if spec.kind == TaskKind.IDENTITY:
            return None
        kind = _HIDDEN_KINDS[spec.kind]
        rng = Rng(spec.seed + 1)
        base = init_params(kind, spec.channels, rng, reduction=self._reduction(spec.channels))
        gammas = GAMMA_NAMES[kind]
        noisy = base.replace(
            {
                name: Tensor(
                    base[name].array
                    + rng.uniform(base[name].shape, -HIDDEN_NOISE, HIDDEN_NOISE).array
                )
                for name in base.names()
                if name not in gammas
            }
        )
        low, high = HIDDEN_GAMMA_RANGE
        return noisy.with_gammas(*(rng.uniform((1,), low, high).item() for _ in gammas))

    def initial_params(self, spec: TaskSpec, kind: BlockKind) -> BlockParams:
        return init_params(
            kind,
            spec.channels,
            Rng(spec.seed + 2),
            reduction=self._reduction(spec.channels),
        )

    def loss_and_gradients(
        self, block: BaseBlock, params: BlockParams, batch: Batch
    ) -> Tuple[float, Dict[str, Tensor]]:
        """Batch-mean MSE and its gradient for every parameter."""
        tape = Tape()
        leaves = bind_params(tape, params)
        total = None
        for f_in, target in batch:
            x = tape.leaf(f_in)
            term = F.mse(block.apply(params, leaves, x).output, target)
            total = term if total is None else F.add(total, term)
        loss = F.scale(total, 1.0 / len(batch))
        grads = tape.gradients_by_name(loss)
        return loss.value.item(), {name: grads[name] for name in params.names()}

    @staticmethod
    def sgd_step(
        params: BlockParams, grads: Dict[str, Tensor], learning_rate: float
    ) -> BlockParams:
        return params.replace(
            {
                name: Tensor(params[name].array - learning_rate * grads[name].array)
                for name in params.names()
            }
        )

    def run_task(
        self,
        spec: TaskSpec,
        kind: BlockKind,
        strict: bool = False,
    ) -> TrainReport:
        """Plain SGD on the task; the loss is recorded before every step and once after the last.

        A loss above the divergence threshold (or a non-finite value) stops the run;
        with ``strict`` the partial report travels on a DivergenceError.
        """
        kind = BlockKind(kind)
        block = self.get_block(kind)
        batch = self.build_batch(spec)
        params = self.initial_params(spec, kind)
        logger.info(
            f"Training {kind.value} on {spec.kind.value} "
            f"({spec.channels}x{spec.height}x{spec.width}, {spec.steps} steps, lr {spec.learning_rate})"
        )

        losses: List[float] = []
        diverged = False
        steps_executed = 0
        for step in range(spec.steps + 1):
            try:
                loss, grads = self.loss_and_gradients(block, params, batch)
            except NonFiniteError:
                diverged = True
                break
            if loss > self.divergence_threshold:
                diverged = True
                break
            losses.append(loss)
            if step == spec.steps:
                break
            try:
                params = self.sgd_step(params, grads, spec.learning_rate)
            except NonFiniteError:
                diverged = True
                break
            steps_executed += 1

        report = TrainReport(
            block=kind,
            task=spec,
            losses=losses,
            steps_executed=steps_executed,
            diverged=diverged,
        )
        if diverged:
            logger.warning(
                f"{kind.value} diverged after {steps_executed} steps on {spec.kind.value}"
            )
            if strict:
                raise DivergenceError(
                    f"loss exceeded {self.divergence_threshold} after {steps_executed} steps",
                    report,
                )
        else:
            logger.info(
                f"Finished {kind.value}: loss {losses[0]:.4e} -> {losses[-1]:.4e}"
            )
        return report

    def find_descent_rate(
        self, spec: TaskSpec, kind: BlockKind, max_halvings: int = MAX_HALVINGS
    ) -> Optional[float]:
        """Learning rate at which one SGD step lowers the loss, halving from the task's."""
        block = self.get_block(kind)
        batch = self.build_batch(spec)
        params = self.initial_params(spec, kind)
        loss, grads = self.loss_and_gradients(block, params, batch)
        learning_rate = spec.learning_rate
        for _ in range(max_halvings + 1):
            try:
                stepped = self.sgd_step(params, grads, learning_rate)
                after, _ = self.loss_and_gradients(block, stepped, batch)
            except NonFiniteError:
                after = float("inf")
            if after < loss:
                return learning_rate
            learning_rate /= 2
        logger.warning(f"No descending step for {kind.value} after {max_halvings} halvings")
        return None

    def compare(
        self,
        spec: TaskSpec,
        kinds: Sequence[BlockKind],
        seeds: Iterable[int],
    ) -> Dict[BlockKind, List[TrainReport]]:
        """Run every kind on every seed of the task; runs are independent."""
        cells = [(BlockKind(k), s) for k in kinds for s in seeds]
        workers = max(1, min(self.get_settings().threads, len(cells) or 1))
        with ThreadPoolExecutor(max_workers=workers) as executor:
            reports = list(
                executor.map(
                    lambda cell: self.run_task(
                        spec.model_copy(update={"seed": cell[1]}), cell[0]
                    ),
                    cells,
                )
            )
        grouped: Dict[BlockKind, List[TrainReport]] = {BlockKind(k): [] for k in kinds}
        for (kind, _), report in zip(cells, reports):
            grouped[kind].append(report)
        return grouped

    @staticmethod
    def write_loss_csv(report: TrainReport, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["step", "loss"])
        for step, loss in enumerate(report.losses):
            writer.writerow([step, repr(loss)])
