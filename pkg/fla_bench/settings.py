from pydantic_settings import (
    BaseSettings,
    SettingsConfigDict,
)
from pydantic import Field

from .constants import Stencil


class Settings(BaseSettings):
    env: str = "dev"
    # Caps parallelism of the cost sweep (FLA_THREADS)
    threads: int = Field(default=4, ge=1)
    seed: int = 7
    # Spatial NL reduction ratio for the Q/K projections
    reduction: int = Field(default=8, ge=1)
    grad_step: float = Field(default=1e-4, gt=0)
    grad_tolerance: float = 1e-5
    grad_stencil: Stencil = Stencil.CENTRAL
    oracle_tolerance: float = 1e-10
    stochastic_tolerance: float = 1e-9
    oracle_max_scalars: int = 10_000
    verify_trials: int = Field(default=100, ge=1)
    divergence_threshold: float = 1e6
    # Wall-clock timing runs at this shape; the anchor shape is analytic only
    timing_shape: str = "16x12x12"
    warmup: int = Field(default=1, ge=0)
    log_level: str = "INFO"

    model_config = SettingsConfigDict(env_prefix="FLA_", env_file=".env")
