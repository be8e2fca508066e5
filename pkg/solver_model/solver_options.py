"""
Typed option sets of the solvers, validated with pydantic.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class SoOptions(BaseModel):
    """
    Projected-gradient social optimum search.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: float = Field(1e-7, gt=0)
    max_iters: int = Field(50_000, ge=1)
    restarts: int = Field(8, ge=1)
    seed: int = Field(0, ge=0)
    threads: int = Field(0, ge=0)
    armijo: float = Field(1e-4, gt=0, lt=1)


class EqOptions(BaseModel):
    """
    Extragradient Wardrop equilibrium search.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: float = Field(1e-6, gt=0)
    max_iters: int = Field(50_000, ge=1)
    restarts: int = Field(16, ge=1)
    seed: int = Field(0, ge=0)
    threads: int = Field(0, ge=0)
    dedup_distance: float = Field(1e-5, ge=0)
    step_ratio: float = Field(0.9, gt=0, lt=1)
    min_step: float = Field(1e-12, gt=0)


class MpecOptions(BaseModel):
    """
    Nested pattern search for the best undifferentiated prices.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: float = Field(1e-7, gt=0)
    budget: int = Field(2_000, ge=1)
    seed: int = Field(0, ge=0)
    starts: int = Field(3, ge=1)
    inner_restarts: int = Field(2, ge=1)
    inner_max_iters: int = Field(20_000, ge=1)
    tau_max: Optional[float] = Field(None, gt=0)
    tau_scale: float = Field(10.0, gt=0)
    delta_min_ratio: float = Field(1e-4, gt=0, lt=1)
    max_widenings: int = Field(3, ge=0)
    threads: int = Field(0, ge=0)


class PipelineOptions(BaseModel):
    """
    Social optimum, marginal prices and induced equilibria in one run.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    so: SoOptions = SoOptions()
    ue: EqOptions = EqOptions()
    acceptance_rtol: float = Field(1e-3, gt=0)
    witness: bool = True


class SolverProfile(BaseModel):
    """
    One named entry of the solver configuration file.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    so: SoOptions = SoOptions()
    ue: EqOptions = EqOptions()
    mpec: MpecOptions = MpecOptions()
    pipeline: PipelineOptions = PipelineOptions()
