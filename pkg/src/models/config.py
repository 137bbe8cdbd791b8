"""Pydantic models for run-configuration validation."""

from pathlib import Path
from typing import Any, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.nsdp.config_loader import load_config, merge_overrides

Command = Literal["validate", "solve", "audit"]
CheckName = Literal["bellman", "euler", "viability", "subdiff"]

ALL_CHECKS: tuple[CheckName, ...] = ("bellman", "euler", "viability", "subdiff")


class ToleranceSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    policy_tol: float = Field(
        default=1e-9, gt=0.0, description="Tie tolerance of recorded minimizers"
    )
    feasibility_tol: float = Field(
        default=1e-9, gt=0.0, description="Slack accepted by viability checks"
    )
    audit_tol: float = Field(
        default=1e-6, gt=0.0, description="FD audit tolerance of integral gradients"
    )
    curvature_bound: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="M in the 2·M·h² interpolation tolerance; estimated when unset",
    )


class SamplingSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    viability_samples: int = Field(default=64, ge=0)
    viability_radius: Optional[float] = Field(
        default=None, ge=0.0, description="Sup-norm radius; the grid spacing when unset"
    )


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    project_candidates: bool = Field(
        default=True, description="Add ℓ¹ projections of infeasible successor nodes"
    )
    max_horizon: int = Field(default=10_000, ge=1, description="Cap on the truncation search")


class RunConfig(BaseModel):
    """One CLI invocation. Unknown keys are rejected at every level."""

    model_config = ConfigDict(extra="forbid")

    command: Command
    model_path: Path
    output_path: Optional[Path] = Field(default=None, description="Value table export (solve)")
    program_path: Optional[Path] = Field(default=None, description="Program file (audit)")
    report_path: Optional[Path] = Field(default=None, description="Machine-readable JSON report")
    checks: List[CheckName] = Field(default_factory=lambda: list(ALL_CHECKS))
    epsilon: Optional[float] = Field(
        default=None, gt=0.0, description="Overrides the model's horizon epsilon"
    )
    seed: int = 0
    parallelism: int = Field(default=1, ge=1)
    record_timing: bool = False
    tolerances: ToleranceSettings = Field(default_factory=ToleranceSettings)
    sampling: SamplingSettings = Field(default_factory=SamplingSettings)
    solver: SolverSettings = Field(default_factory=SolverSettings)

    @field_validator("checks")
    @classmethod
    def unique_checks(cls, value: List[CheckName]) -> List[CheckName]:
        if not value:
            raise ValueError("At least one check must be selected")
        return [c for c in ALL_CHECKS if c in value]

    @classmethod
    def from_yaml(cls, config_path: Optional[str | Path] = None, **overrides: Any) -> "RunConfig":
        """File values (when a path is given) with CLI overrides on top.

        ``None`` overrides are skipped.
        """
        raw = load_config(config_path) if config_path is not None else {}
        return cls(**merge_overrides(raw, overrides))
