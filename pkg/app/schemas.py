"""Pydantic schemas for run configuration and verification reports."""
from typing import Optional, List
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from app.models import ProfileKind, ObstacleKind, Relaxation


class _Section(BaseModel):
    """Config section: unknown keys are hard errors."""
    model_config = ConfigDict(extra="forbid")


# ============= Configuration Schemas =============

class GasSection(_Section):
    """Gas law section."""
    gamma: float = Field(default=1.4, description="Adiabatic index")

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v: float) -> float:
        """The adiabatic index must exceed one."""
        if not v > 1.0:
            raise ValueError("gamma must exceed 1")
        return v


class ProfileSection(_Section):
    """Upstream axial-velocity profile."""
    kind: ProfileKind = Field(default=ProfileKind.UNIFORM)
    u_bar: float = Field(default=1.0, gt=0.0, description="Far-field axial velocity")
    amplitude: float = Field(default=0.0, ge=0.0, description="Vortical amplitude K")
    rho_inf: float = Field(..., gt=0.0, description="Upstream density")
    table: Optional[str] = Field(None, description="Two-column (r, u) table for tabulated profiles")

    @model_validator(mode='after')
    def validate_kind_requirements(self) -> 'ProfileSection':
        """Tabulated profiles need a table path."""
        if self.kind == ProfileKind.TABULATED and not self.table:
            raise ValueError("table is required for tabulated profiles")
        return self


class ObstacleSection(_Section):
    """Obstacle geometry."""
    kind: ObstacleKind = Field(default=ObstacleKind.NONE)
    height: float = Field(default=0.0, ge=0.0)
    table: Optional[str] = Field(None, description="Two-column (x, f) table for tabulated obstacles")

    @model_validator(mode='after')
    def validate_kind_requirements(self) -> 'ObstacleSection':
        """Tabulated obstacles need a table path."""
        if self.kind == ObstacleKind.TABULATED and not self.table:
            raise ValueError("table is required for tabulated obstacles")
        return self


class DomainSection(_Section):
    """Truncated computational window [-X, X] x [0, L]."""
    X: float = Field(default=8.0, ge=2.0, description="Axial half-length")
    L: float = Field(default=6.0, gt=0.0, description="Radial extent")
    nx: int = Field(default=128, ge=16)
    nr: int = Field(default=64, ge=16)


class PicardSection(_Section):
    """Outer fixed-point iteration."""
    max_iters: int = Field(default=200, ge=1)
    damping: float = Field(default=0.7, gt=0.0, le=1.0, description="Fixed factor, or the first Aitken factor")
    tol_rel: float = Field(default=1e-9, gt=0.0)
    relaxation: Relaxation = Field(default=Relaxation.AITKEN)
    min_damping: float = Field(default=0.02, gt=0.0, le=1.0, description="Floor of the Aitken factor")

    @model_validator(mode='after')
    def validate_damping_range(self) -> 'PicardSection':
        """The Aitken floor cannot exceed the starting factor."""
        if self.min_damping > self.damping:
            raise ValueError("min_damping must not exceed damping")
        return self


class LinearSection(_Section):
    """Inner preconditioned conjugate gradient."""
    tol: float = Field(default=1e-10, gt=0.0)
    max_iters: int = Field(default=500, ge=1)


class SolverConfig(_Section):
    """Stream-function solver parameters."""
    eps0: float = Field(default=0.05, description="Subsonic cutoff parameter")
    k_schedule: List[float] = Field(default_factory=lambda: [0.1, 0.03, 0.01, 0.0])
    picard: PicardSection = Field(default_factory=PicardSection)
    linear: LinearSection = Field(default_factory=LinearSection)

    @field_validator("eps0")
    @classmethod
    def validate_eps0(cls, v: float) -> float:
        """Cutoff must lie strictly inside (0, 1/4)."""
        if not 0.0 < v < 0.25:
            raise ValueError("eps0 must lie in (0, 0.25)")
        return v

    @field_validator("k_schedule")
    @classmethod
    def validate_k_schedule(cls, v: List[float]) -> List[float]:
        """Axis regularizations: strictly decreasing, non-negative, ending at 0."""
        if not v:
            raise ValueError("k_schedule must not be empty")
        if v[-1] != 0.0:
            raise ValueError("k_schedule must end with 0")
        if any(k < 0.0 for k in v):
            raise ValueError("k_schedule entries must be non-negative")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError("k_schedule must be strictly decreasing")
        return v


class TasksSection(_Section):
    """Parameters of the individual tasks."""
    sweep_densities: List[float] = Field(default_factory=list)
    warm_start: bool = True
    bracket_rho_hi: Optional[float] = Field(None, gt=0.0)
    bracket_rho_lo: Optional[float] = Field(None, gt=0.0)
    bracket_width_tol: float = Field(default=0.01, gt=0.0)
    export_limit: bool = False
    streamlines: int = Field(default=16, ge=1)
    uniqueness_inits: int = Field(default=0, ge=0, description="0 skips the uniqueness probe")
    probe_fraction: float = Field(default=0.9, gt=0.0, lt=1.0)
    barrier_delta0: Optional[float] = Field(None, gt=0.0)
    annulus_steps: int = Field(default=4096, ge=16)

    @field_validator("sweep_densities")
    @classmethod
    def validate_sweep(cls, v: List[float]) -> List[float]:
        """Sweep densities are positive and strictly decreasing."""
        if any(rho <= 0.0 for rho in v):
            raise ValueError("sweep densities must be positive")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError("sweep densities must be strictly decreasing")
        return v


class OutputSection(_Section):
    """Output policy."""
    directory: str = "./runs"
    checkpoint: bool = False
    checkpoint_every: Optional[int] = Field(None, ge=1)


class RunConfig(_Section):
    """Complete validated run configuration."""
    gas: GasSection = Field(default_factory=GasSection)
    profile: ProfileSection
    obstacle: ObstacleSection = Field(default_factory=ObstacleSection)
    domain: DomainSection = Field(default_factory=DomainSection)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    tasks: TasksSection = Field(default_factory=TasksSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode='after')
    def validate_geometry(self) -> 'RunConfig':
        """
        Cross-section checks.

        Edge cases handled:
        - obstacle taller than the radial window
        - truncation radius too small for the obstacle (L > max(1, J) + 1)
        - bracket endpoints in the wrong order
        """
        if self.obstacle.kind == ObstacleKind.SMOOTH_BUMP:
            if self.domain.L <= self.obstacle.height:
                raise ValueError("obstacle taller than domain")
            if self.domain.L <= max(1.0, self.obstacle.height) + 1.0:
                raise ValueError("L must exceed max(1, obstacle height) + 1")
        elif self.domain.L <= 2.0:
            raise ValueError("L must exceed 2")
        hi, lo = self.tasks.bracket_rho_hi, self.tasks.bracket_rho_lo
        if hi is not None and lo is not None and hi <= lo:
            raise ValueError("bracket_rho_hi must exceed bracket_rho_lo")
        return self


# ============= Report Schemas =============

class CheckResult(BaseModel):
    """Outcome of a single verification check."""
    name: str
    passed: bool
    margin: float = Field(..., description="Signed margin; non-negative when the check holds")
    tolerance: float = 0.0
    detail: Optional[str] = None


class VerificationReport(BaseModel):
    """Named checks with pass/fail, margin and tolerance."""
    checks: List[CheckResult] = Field(default_factory=list)
    flagged_nodes: int = 0

    @model_validator(mode='after')
    def validate_unique_names(self) -> 'VerificationReport':
        """Every check appears exactly once."""
        names = [c.name for c in self.checks]
        if len(names) != len(set(names)):
            raise ValueError("duplicate check names in report")
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        """Look up a check by name."""
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]


class FarfieldReport(BaseModel):
    """Far-field decay diagnostics."""
    x_probe: float
    probe_deviation: float = Field(..., description="max |psi - psi_bar| on the probe columns")
    probe_gradient: float = Field(..., description="max |grad(psi - psi_bar)| / r^(1/2) on the probe columns")
    weighted_l2: float = Field(..., description="r-weighted L2 norm of (rho u - rho_inf u_inf, rho v)")


class UniquenessReport(BaseModel):
    """Multi-initialization agreement probe."""
    status: str = Field(..., description="agree | disagree | inconclusive")
    distance: Optional[float] = None
    runs: int = 0
    tolerance: float = 1e-6


class LimitSequenceReport(BaseModel):
    """Pointwise Cauchy diagnostic for a sequence of certified fields."""
    densities: List[float]
    gaps: List[float]
    decreasing: bool
    rows: int
