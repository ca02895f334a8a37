from typing import Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)
from pydantic_core import PydanticCustomError

from .constants import (
    BlockKind,
    CostTerm,
    OutputFormat,
    Stencil,
    Subcommand,
    TaskKind,
)


def parse_shape(value: str) -> tuple[int, int, int]:
    """Parse ``CxHxW`` into a positive integer triple."""
    parts = value.lower().split("x")
    try:
        shape = tuple(int(p) for p in parts)
    except ValueError:
        raise PydanticCustomError(
            "value_error", "Shape must look like CxHxW, got {value}", {"value": value}
        )
    if len(shape) != 3 or any(e < 1 for e in shape):
        raise PydanticCustomError(
            "value_error",
            "Shape must be three positive extents CxHxW, got {value}",
            {"value": value},
        )
    return shape  # type: ignore[return-value]


class ParameterGradError(BaseModel):
    name: str
    max_rel_error: float = Field(ge=0)
    max_abs_error: float = Field(ge=0)
    worst_index: int = Field(ge=0)
    worst_analytic: float
    worst_numeric: float


class GradCheckReport(BaseModel):
    step: float = Field(gt=0)
    stencil: Stencil = Stencil.CENTRAL
    entries: list[ParameterGradError]

    @computed_field
    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    @property
    def worst(self) -> Optional[ParameterGradError]:
        if not self.entries:
            return None
        return max(self.entries, key=lambda e: e.max_rel_error)

    def entry(self, name: str) -> ParameterGradError:
        return next(e for e in self.entries if e.name == name)

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


class CostConfig(BaseModel):
    channels: int = Field(ge=1)
    height: int = Field(ge=1)
    width: int = Field(ge=1)
    reduction: int = Field(default=8, ge=1)
    flops_per_mac: int = 2
    bytes_per_scalar: int = 4
    include_projections: bool = True
    include_softmax: bool = True

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_reduction(self):
        if self.channels % self.reduction:
            raise PydanticCustomError(
                "value_error",
                "Reduction ratio {r} does not divide C={c}",
                {"r": self.reduction, "c": self.channels},
            )
        return self

    @property
    def positions(self) -> int:
        return self.height * self.width

    @property
    def merged_extent(self) -> Optional[int]:
        """S of the merged (H+W) batch; defined only for square inputs."""
        return self.height if self.height == self.width else None


class CostReport(BaseModel):
    kind: BlockKind
    config: CostConfig
    flops_by_term: dict[CostTerm, int]
    activation_bytes_peak: int = Field(ge=0)
    attention_map_elements: int = Field(ge=0)
    # Liveness events, "+name:scalars" or "-name"
    schedule: tuple[str, ...] = ()

    @computed_field
    @property
    def flops_total(self) -> int:
        return sum(self.flops_by_term.values())

    @property
    def gflops(self) -> float:
        return self.flops_total / 1e9

    @property
    def activation_mb(self) -> float:
        return self.activation_bytes_peak / 2**20

    @property
    def matmul_flops(self) -> int:
        return (
            self.flops_by_term[CostTerm.AFFINITY]
            + self.flops_by_term[CostTerm.AGGREGATION]
        )


class TaskSpec(BaseModel):
    kind: TaskKind = TaskKind.FULL_MIX
    channels: int = Field(default=4, ge=1)
    height: int = Field(default=6, ge=1)
    width: int = Field(default=6, ge=1)
    seed: int = 0
    steps: int = Field(default=500, ge=0)
    learning_rate: float = Field(default=0.1, gt=0)
    batch: int = Field(default=4, ge=1)

    model_config = ConfigDict(frozen=True)


class TrainReport(BaseModel):
    block: BlockKind
    task: TaskSpec
    losses: list[float]
    steps_executed: int
    diverged: bool = False

    @field_validator("losses")
    @classmethod
    def validate_losses(cls, v):
        for loss in v:
            if not loss >= 0.0 or loss == float("inf"):
                raise PydanticCustomError(
                    "value_error", "Losses must be finite and non-negative"
                )
        return v

    @computed_field
    @property
    def loss_ratio(self) -> float:
        """final / initial loss; 0 when the initial loss is already 0."""
        if not self.losses or self.losses[0] == 0.0:
            return 0.0
        return self.losses[-1] / self.losses[0]


class MixingReport(BaseModel):
    kind: BlockKind
    source: tuple[int, int, int]
    moved: list[tuple[int, int]]
    moved_frozen_attention: list[tuple[int, int]]
    moved_prior_only: list[tuple[int, int]]

    def reaches(self, h: int, w: int) -> bool:
        return (h, w) in self.moved


class SuiteResult(BaseModel):
    suite: str
    passed: bool
    cases: int
    worst: float
    detail: str = ""

    def summary_line(self) -> str:
        status = "pass" if self.passed else "fail"
        line = f"suite={self.suite} status={status} cases={self.cases} worst={self.worst!r}"
        if self.detail:
            line += f" detail={self.detail}"
        return line


class VerifyReport(BaseModel):
    seed: int
    suites: list[SuiteResult]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def render(self) -> str:
        lines = [s.summary_line() for s in self.suites]
        lines.append(
            f"verify seed={self.seed} status={'pass' if self.passed else 'fail'}"
        )
        return "\n".join(lines) + "\n"


class BenchConfig(BaseModel):
    subcommand: Subcommand
    kinds: list[BlockKind]
    shapes: list[tuple[int, int, int]]
    seed: int
    repetitions: int = Field(default=3, ge=1)
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV

    model_config = ConfigDict(extra="forbid")

    @field_validator("shapes", mode="before")
    @classmethod
    def validate_shapes(cls, v):
        return [parse_shape(s) if isinstance(s, str) else s for s in v]
