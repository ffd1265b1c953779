import math
from typing import Annotated, Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

__all__ = [
    "SymmetryFlag",
    "PathTag",
    "DilationKind",
    "CaseFamily",
    "Theorem",
    "CaseStatus",
    "NumericalDefaults",
    "CurvePoint",
    "SegmentRecord",
    "FlowDiagnostics",
    "FlowReport",
    "DilationReport",
    "KramersCluster",
    "KramersReport",
    "ConeReport",
    "GradedModuleReport",
    "PhiEquivalenceReport",
    "ExpectedValues",
    "CorpusCase",
    "Corpus",
    "CaseResult",
    "VerificationSummary",
    "THEOREMS",
    "SCHEMA_VERSION",
]

type SymmetryFlag = Literal["even_real", "odd_real", "even_symmetric", "odd_symmetric"]
type PathTag = Literal["plain", "odd"]
type DilationKind = Literal["halmos", "polar", "randomized", "u0"]
type CaseFamily = Literal["shift", "polar", "perturbed", "odd", "siegel"]
type Theorem = Literal["t31", "t71", "t43", "t44", "z2pair", "kramers"]
type CaseStatus = Literal["passed", "failed", "skipped", "error"]

THEOREMS: tuple[Theorem, ...] = ("t31", "t71", "t43", "t44", "z2pair", "kramers")
SCHEMA_VERSION = 1

PositiveTol = Annotated[float | None, Field(gt=0)]
PositiveInt = Annotated[int | None, Field(ge=1)]


class NumericalDefaults(BaseModel, frozen=True):
    """Shape of numerical settings at any tier.

    All fields are None-able; None means "not set at this tier".
    After merging, HARDCODED_DEFAULTS guarantees non-None for every field.
    """

    max_refine: PositiveInt = None
    structural_tol: PositiveTol = None
    eigen_tol: PositiveTol = None
    rank_tol: PositiveTol = None
    circle_samples: PositiveInt = None
    max_margin: PositiveInt = None
    max_concurrency: PositiveInt = None

    @field_validator("structural_tol", "eigen_tol", "rank_tol", mode="after")
    @classmethod
    def reject_non_finite(cls, v: float | None) -> float | None:
        """Safety net for programmatic construction.
        Env vars are validated manually in _read_env_defaults() with ConfigurationError."""
        if v is not None and not math.isfinite(v):
            raise ValueError(f"must be a finite number, got {v}")
        return v


# ---------------------------------------------------------------------------
# Spectral flow reports
# ---------------------------------------------------------------------------


class CurvePoint(BaseModel):
    """Gap eigenvalues of one path node, sorted ascending."""

    model_config = ConfigDict(frozen=True)

    s: float
    eigenvalues: list[float]


class SegmentRecord(BaseModel):
    """One accepted segment of the final partition with its bin bounds."""

    model_config = ConfigDict(frozen=True)

    start: float
    stop: float
    lower: float = Field(lt=0)
    upper: float = Field(gt=0)
    contribution: int


class FlowDiagnostics(BaseModel):
    model_config = ConfigDict(frozen=True)

    refinements: int = 0
    max_level: int = 0
    window: tuple[int, int] = (0, -1)
    matrix_size: int = 0
    endpoint_count: int = 0
    upward_crossings: int = 0
    downward_crossings: int = 0
    refinement_check: int | None = None


class FlowReport(BaseModel):
    """Result of a spectral flow computation.

    ``flow`` is the telescoped sum of the per-segment bin-count differences,
    so it always equals the sum of ``segments[*].contribution``.
    """

    model_config = ConfigDict(frozen=True)

    flow: int
    flow_mod2: int | None = None
    grid: list[float]
    segments: list[SegmentRecord]
    curves: list[CurvePoint]
    diagnostics: FlowDiagnostics = Field(default_factory=FlowDiagnostics)

    @model_validator(mode="after")
    def flow_is_telescoped_sum(self) -> Self:
        total = sum(seg.contribution for seg in self.segments)
        if total != self.flow:
            raise ValueError(f"flow {self.flow} != sum of segment contributions {total}")
        if self.flow_mod2 is not None and self.flow_mod2 != self.flow % 2:
            raise ValueError("flow_mod2 must equal flow mod 2")
        return self

    def to_csv_rows(self) -> list[list[str]]:
        """Rows (s, lambda_1, lambda_2, ...) padded to a common width, header first."""
        width = max((len(p.eigenvalues) for p in self.curves), default=0)
        header = ["s", *[f"lambda_{j + 1}" for j in range(width)]]
        rows = [header]
        for point in self.curves:
            values = [f"{v:.12g}" for v in point.eigenvalues]
            rows.append([f"{point.s:.12g}", *values, *[""] * (width - len(values))])
        return rows


# ---------------------------------------------------------------------------
# Check reports (never raised; failures are carried in ``passed``)
# ---------------------------------------------------------------------------


class DilationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    compression_residual: float
    unitarity_defect: float
    commutator_background: float
    commutator_window: tuple[int, int]
    tol: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return (
            self.compression_residual <= self.tol
            and self.unitarity_defect <= self.tol
            and self.commutator_background <= self.tol
        )


class KramersCluster(BaseModel):
    model_config = ConfigDict(frozen=True)

    eigenvalue: float
    multiplicity: int
    pairing_residual: float
    partner_residual: float


class KramersReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    commutation_residual: float
    clusters: list[KramersCluster]
    tol: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def all_even(self) -> bool:
        return all(c.multiplicity % 2 == 0 for c in self.clusters)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return (
            self.commutation_residual <= self.tol
            and self.all_even
            and all(
                c.pairing_residual < self.tol and c.partner_residual < self.tol
                for c in self.clusters
            )
        )

    def has_degenerate_gap_eigenvalue(self) -> bool:
        """True when some eigenvalue in (-1, 1) is at least doubly degenerate."""
        return any(c.multiplicity >= 2 and abs(c.eigenvalue) < 1 for c in self.clusters)


class ConeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: Literal["complex", "real_I"]
    boundary_residual: float
    deviation_background: float
    reflection_residual: float | None = None
    tol: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        checks = [self.boundary_residual, self.deviation_background]
        if self.reflection_residual is not None:
            checks.append(self.reflection_residual)
        return all(r <= self.tol for r in checks)


class GradedModuleReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    grading_square: float
    anticommutation: float
    self_adjointness: float
    involution: float
    sample_residuals: list[float] = Field(default_factory=list)
    tol: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        residuals = [
            self.grading_square,
            self.anticommutation,
            self.self_adjointness,
            self.involution,
            *self.sample_residuals,
        ]
        return all(r <= self.tol for r in residuals)


class PhiEquivalenceReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    flow: int
    winding: int

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return self.flow == self.winding


# ---------------------------------------------------------------------------
# Corpus and verification
# ---------------------------------------------------------------------------


class ExpectedValues(BaseModel):
    """Values known in closed form for a case; None means "not predicted"."""

    model_config = ConfigDict(frozen=True)

    index: int | None = None
    z2: int | None = Field(default=None, ge=0, le=1)
    flow: int | None = None
    z2_flow: int | None = Field(default=None, ge=0, le=1)


class CorpusCase(BaseModel):
    """Seeded recipe for one contraction and the dilation built from it.

    Regenerating the operators from ``(family, seed, ...)`` is deterministic.
    """

    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1)
    seed: int = Field(ge=0)
    family: CaseFamily
    shift_power: int = 1
    perturbation_rank: int = Field(default=0, ge=0)
    polar_strength: float = Field(default=0.0, ge=0.0, le=1.0)
    symmetry_class: Literal["plain", "odd"] = "plain"
    dilation: DilationKind = "halmos"
    expected: ExpectedValues = Field(default_factory=ExpectedValues)

    @model_validator(mode="after")
    def dilation_fits_class(self) -> Self:
        if self.dilation == "u0" and not (self.family == "odd" and self.shift_power == 1):
            raise ValueError("u0 dilation only exists for the diag(S, S*) case")
        if self.dilation == "randomized" and self.symmetry_class == "odd":
            raise ValueError("randomized dilations are not odd symmetric")
        if self.family in ("odd", "siegel") and self.symmetry_class != "odd":
            raise ValueError(f"family {self.family!r} requires symmetry_class 'odd'")
        return self


class Corpus(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    classes: list[str] = Field(default_factory=list)
    cases: list[CorpusCase] = Field(default_factory=list)
    corpus_hash: str = ""

    def get(self, case_id: str) -> CorpusCase | None:
        return next((c for c in self.cases if c.id == case_id), None)


class CaseResult(BaseModel):
    """Per-case verification outcome.

    ``error``/``error_type`` are set exactly when ``status == "error"``.
    """

    model_config = ConfigDict(frozen=True)

    case_id: str
    theorem: Theorem
    status: CaseStatus
    values: dict[str, Any] = Field(default_factory=dict)
    error: str | None = None
    error_type: str | None = None  # e.g. "SpectralCollisionError"

    @model_validator(mode="after")
    def error_iff_error_status(self) -> Self:
        if (self.status == "error") != (self.error is not None):
            raise ValueError("error must be set exactly when status is 'error'")
        return self

    @property
    def formatted_error(self) -> str:
        prefix = f"[{self.error_type}] " if self.error_type else ""
        return f"{prefix}{self.error}"


class VerificationSummary(BaseModel):
    """Aggregate of verification runs, ordered by case id then theorem."""

    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    corpus_hash: str = ""
    theorems: list[Theorem]
    results: list[CaseResult]
    generated_at: str = ""  # excluded from determinism comparisons

    def count(self, status: CaseStatus, theorem: Theorem | None = None) -> int:
        return sum(
            1
            for r in self.results
            if r.status == status and (theorem is None or r.theorem == theorem)
        )

    @computed_field  # type: ignore[prop-decorator]
    @property
    def total(self) -> int:
        return len(self.results)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> int:
        return self.count("passed")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def failed(self) -> int:
        return self.count("failed")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def errors(self) -> int:
        return self.count("error")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def skipped(self) -> int:
        return self.count("skipped")

    @property
    def exit_code(self) -> int:
        """0 when everything passed or was skipped, 1 on failures, 2 on engine errors."""
        if self.errors:
            return 2
        if self.failed:
            return 1
        return 0

    def per_theorem(self) -> dict[str, dict[str, int]]:
        return {
            t: {s: self.count(s, t) for s in ("passed", "failed", "skipped", "error")}
            for t in self.theorems
        }
