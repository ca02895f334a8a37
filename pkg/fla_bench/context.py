from dataclasses import dataclass, field
from typing import Optional

from . import dependencies
from .core.tensor import Rng


@dataclass
class BenchContext:
    """Shared state of one CLI invocation: the seed and the services built on settings."""

    seed: int
    rng: Optional[Rng] = field(default=None)

    def __post_init__(self):
        if self.rng is None:
            self.rng = Rng(self.seed)

    def get_settings(self):
        return dependencies.get_settings()

    def get_block(self, kind, **options):
        return dependencies.get_block(kind, **options)

    def create_services(self):
        return {
            "cost_model": dependencies.get_cost_model_service(),
            "trainer": dependencies.get_trainer_service(),
            "verify": dependencies.get_verify_service(),
            "timing": dependencies.get_timing_service(),
        }
