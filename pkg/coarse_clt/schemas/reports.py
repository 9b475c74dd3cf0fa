from datetime import datetime
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

Verdict = Literal["zero", "positive", "indeterminate"]


class ComponentSummary(BaseModel):
    """Model for one strongly connected component."""

    vertices: List[int] = Field(..., description="Vertices of the component")
    growth_rate: float = Field(..., description="Growth rate of internal paths (0 if transient)")
    period: Optional[int] = Field(default=None, description="Period, absent for transient components")
    maximal: bool = Field(..., description="Whether the growth rate equals λ")


class AnalysisReport(BaseModel):
    """Model for the output of the analyze subcommand."""

    name: Optional[str] = None
    vertices: int
    edges: int
    initial: int
    group: str = Field(..., description="Kind of the evaluation group")
    growth_rate: float = Field(..., description="Leading eigenvalue λ")
    diagnosis: str = Field(..., description="Semisimplicity label, e.g. almost-semisimple(2)")
    period: int
    window_growth: float = Field(..., description="Late/early window ratio of ‖Mⁿ‖/λⁿ")
    growth_vs_n5: float
    rho: Optional[List[float]] = Field(default=None, description="Right eigenvector ρ = M∞·1")
    u: Optional[List[float]] = Field(default=None, description="Left eigenvector u = e₀ᵀM∞")
    stationary: Optional[List[float]] = Field(
        default=None, description="Parry vertex distribution π (semisimple structures)"
    )
    eigen_residuals: Optional[List[float]] = None
    components: List[ComponentSummary]
    large_growth: List[int]
    small_growth: List[int]
    note: Optional[str] = None


class LoopEntry(BaseModel):
    edges: List[int]
    word: str
    length: int
    probability: float


class ReturnTimeReport(BaseModel):
    """Model for the truncated return-time identities at a vertex."""

    return_time: float = Field(..., description="Truncated Σ ‖l‖ μ_v(l)")
    inverse_pi: float = Field(..., description="1/π_v")
    captured_mass: float
    return_residual: float
    visits: List[float] = Field(..., description="Truncated expected visits n_w")
    visit_residuals: List[float] = Field(..., description="|π_w - n_w/R| per vertex")
    max_visit_residual: float


class LoopsReport(BaseModel):
    """Model for the output of the loops subcommand."""

    vertex: int
    cutoff: int
    loops: List[LoopEntry]
    captured_mass: float
    identities: ReturnTimeReport


class TvEntry(BaseModel):
    n: int
    trim: int
    middle_length: int
    value: float


class TvReport(BaseModel):
    """Model for the output of the tv subcommand."""

    log_base: str = Field(default="e", description="Base of the logarithmic trim length")
    entries: List[TvEntry]


class FellowTravelerSummary(BaseModel):
    constant: int
    length_defect: int
    maxlen: int
    elements: List[str]
    paths_checked: int
    witness: Optional[List[str]] = None


class DriftVariance(BaseModel):
    """Model for drift and variance estimates at one radius."""

    n: int
    samples: int
    mode: Literal["mc", "exact"]
    mean: float = Field(..., description="Mean observable")
    drift: float = Field(..., description="ℓ̂ = mean/n")
    variance: float = Field(..., description="σ̂² = var/n")
    drift_se: float = Field(..., description="Standard error of ℓ̂ (0 in exact mode)")
    variance_se: float = Field(..., description="Standard error of σ̂² (0 in exact mode)")


class ZeroVarianceReport(BaseModel):
    """Model for the plateau probe of the maximal defect."""

    verdict: Literal["zero", "positive"]
    maxlen: int
    drift: float = Field(..., description="ℓ̂ from the exact sphere at maxlen")
    defects: List[float] = Field(..., description="D(n) for n = 1..maxlen")
    plateau: bool
    certified_range: List[int] = Field(..., description="Lengths covered by exhaustive checks")
    max_defect: float
    witness: Optional[str] = Field(default=None, description="Path word with the largest defect")
    witness_defect: Optional[float] = None
    translation_defect: Optional[float] = Field(
        default=None, description="max |τ_X - ℓ̂·τ_G| over the sphere at maxlen"
    )


class ComponentRun(BaseModel):
    """Model for one maximal component rerun."""

    component: List[int]
    stream: int
    drift: float
    variance: float
    drift_se: float
    variance_se: float
    drift_agrees: bool
    variance_agrees: bool


class TranslationAgreement(BaseModel):
    """Model comparing translation-length statistics with displacement statistics."""

    drift_gap: float
    variance_gap: float
    ks_against_displacement: float = Field(
        ..., description="KS of translation values normalized by the displacement ℓ̂, σ̂²"
    )
    proxy_gap_max: Optional[float] = Field(
        default=None, description="max |τ - (d(g²) - d(g))| over the samples"
    )


class CltReport(BaseModel):
    """Model for one observable at one radius."""

    observable: Literal["displacement", "translation"]
    n: int
    samples: int
    mode: Literal["mc", "exact"]
    seed: int
    period: int
    drift: float
    variance: float
    drift_se: float
    variance_se: float
    ks: float = Field(..., description="KS distance to N(0, σ̂²), or to δ₀ for verdict zero")
    verdict: Verdict
    max_defect: Optional[float] = None
    gromov_tail_fraction: Optional[float] = Field(
        default=None, description="Fraction of samples with (go, g⁻¹o)_o > 0.5√n"
    )
    log_trim_shift_mean: Optional[float] = None
    log_trim_shift_max: Optional[float] = None
    translation: Optional[TranslationAgreement] = None
    components: Optional[List[ComponentRun]] = None


class ExperimentReport(BaseModel):
    """Model for the output of the clt subcommand."""

    automaton: str
    action: Dict[str, Any]
    seed: int
    growth_rate: float
    diagnosis: str
    period: int
    probe: Optional[ZeroVarianceReport] = None
    runs: List[CltReport]


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str


class VerificationReport(BaseModel):
    checks: List[CheckResult]
    passed: bool


class RunManifest(BaseModel):
    """Model for the run manifest written next to a report."""

    subcommand: str
    config: Dict[str, Any] = Field(..., description="Resolved configuration")
    version: str
    seed: Optional[int] = None
    inputs: Dict[str, str] = Field(default_factory=dict, description="SHA-256 of every file read")
    outputs: List[str] = Field(default_factory=list)
    started_at: datetime
    runtime_seconds: float
