from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator


class TermSpec(BaseModel):
    beta: List[int]
    re: float
    im: float = 0.0


class SymbolSpec(BaseModel):
    m: List[int] = Field(..., min_length=1)
    terms: List[TermSpec] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_dimensions(self) -> "SymbolSpec":
        for term in self.terms:
            if len(term.beta) != len(self.m):
                raise ValueError(f"term {term.beta} does not match dimension {len(self.m)}")
        return self

    def to_symbol(self, *, strict: bool = True):
        from anikern.aniso_core import Symbol

        return Symbol.from_terms(
            self.m,
            {tuple(t.beta): complex(t.re, t.im) for t in self.terms},
            strict=strict,
        )

    @classmethod
    def from_symbol(cls, symbol) -> "SymbolSpec":
        return cls.model_validate(symbol.to_dict())


class GridSpec(BaseModel):
    radii: List[float] = Field(..., min_length=1)
    counts: List[int] = Field(..., min_length=1)

    @field_validator("radii")
    @classmethod
    def _positive_radii(cls, value: List[float]) -> List[float]:
        if any(r <= 0 for r in value):
            raise ValueError("radii must be positive")
        return value

    @field_validator("counts")
    @classmethod
    def _even_counts(cls, value: List[int]) -> List[int]:
        if any(c % 2 for c in value):
            raise ValueError("counts must be even")
        if any(c < 4 for c in value):
            raise ValueError("counts must be at least 4")
        return value

    @model_validator(mode="after")
    def _same_length(self) -> "GridSpec":
        if len(self.radii) != len(self.counts):
            raise ValueError("radii and counts must have the same length")
        return self

    def to_grid(self):
        from anikern.grid import AnisoGrid

        return AnisoGrid(radii=tuple(self.radii), counts=tuple(self.counts))


CoefficientValues = Union[float, List[float], str, Dict[str, List[float]]]


class PairSpec(BaseModel):
    alpha: List[int]
    beta: List[int]
    values: CoefficientValues = Field(
        ...,
        description="constant, [re, im], path to a .npy blob, or {'checkerboard': [low, high]}",
    )


class ReferenceSpec(BaseModel):
    alpha: List[int]
    beta: List[int]
    value: float


class CoefficientFieldSpec(BaseModel):
    m: List[int] = Field(..., min_length=1)
    grid: GridSpec
    reference: List[ReferenceSpec] = Field(..., min_length=1)
    pairs: List[PairSpec] = Field(..., min_length=1)


class LFOptions(BaseModel):
    coarse_grid_radius_t: Optional[float] = Field(default=None, gt=0)
    n_starts: int = Field(default=8, ge=1)
    tol: float = Field(default=1e-10, gt=0)
    coarse_nodes: Optional[int] = Field(default=None, ge=3)
    max_iter: int = Field(default=200, ge=1)


class ComparabilityReport(BaseModel):
    constant_c: float
    constant_C: float
    witness_points: List[List[float]]


class BoundFit(BaseModel):
    C: float = Field(..., gt=0)
    M: float = Field(..., ge=0)
    n_points: int
    min_margin: float
    includes_Mt_term: bool
    margins: List[float] = Field(default_factory=list, exclude=True)


class HypothesisReport(BaseModel):
    which: Literal["H1", "H2", "H3"]
    constants: Dict[str, float]
    samples: int
    worst_case: int
    accepted: bool
    notes: List[str] = Field(default_factory=list)


class HolderEstimate(BaseModel):
    alpha: float
    stderr: float
    floor: float
    accepted: bool


class CheckResult(BaseModel):
    name: str
    status: Literal["pass", "fail", "error", "skipped"]
    seconds: float = 0.0
    detail: Dict[str, Any] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
    message: Optional[str] = None


class Diagnostics(BaseModel):
    valid: bool
    errors: List[str] = Field(default_factory=list)
    derived: Dict[str, Any] = Field(default_factory=dict)


class ExperimentConfig(BaseModel):
    symbol: Optional[SymbolSpec] = None
    coefficients: Optional[str] = Field(
        default=None, description="path to a CoefficientField JSON document"
    )
    grid: Optional[GridSpec] = None
    times: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    lambdas: List[List[float]] = Field(default_factory=list)
    kappa: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    output_dir: str = "anikern-out"
    checks: List[str] = Field(default_factory=list)
    samples: int = Field(default=48, ge=1)
    shift: float = 0.0
    freq_counts: Optional[List[int]] = None

    @field_validator("times")
    @classmethod
    def _positive_times(cls, value: List[float]) -> List[float]:
        if any(t <= 0 for t in value):
            raise ValueError("times must be positive")
        return value

    @field_validator("checks")
    @classmethod
    def _registered_checks(cls, value: List[str]) -> List[str]:
        from anikern.checks import CHECKS

        unknown = [name for name in value if name not in CHECKS]
        if unknown:
            raise ValueError(f"unknown checks: {', '.join(unknown)}")
        return value

    @model_validator(mode="after")
    def _has_operator(self) -> "ExperimentConfig":
        if self.symbol is None and self.coefficients is None:
            raise ValueError("config needs a symbol or a coefficient field")
        return self
