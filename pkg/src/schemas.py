### file formats read and written by wbary: measure / grid JSON, family specs,
# experiment outputs and stored-run summaries.

from datetime import datetime
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ==========================================
# 1. Measure Schemas
# ==========================================
class MeasureFile(BaseModel):
    """{"dim": d, "domain": [[lo, hi]] * d, "points": [[...]], "weights": [...]}"""

    model_config = ConfigDict(extra="forbid")

    dim: int = Field(..., ge=1, description="ambient dimension d")
    domain: Optional[List[List[float]]] = Field(None, description="declared box Ω, one [lo, hi] row per axis")
    points: List[List[float]] = Field(..., min_length=1)
    weights: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_shapes(self):
        if any(len(p) != self.dim for p in self.points):
            raise ValueError(f"every point needs {self.dim} coordinates")
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights differ in length")
        if self.domain is not None and (len(self.domain) != self.dim or any(len(r) != 2 for r in self.domain)):
            raise ValueError("domain needs one [lo, hi] pair per axis")
        return self


class GridFile(BaseModel):
    """{"dim", "origin", "cell_size", "shape", "values"}; values are flattened in C order."""

    model_config = ConfigDict(extra="forbid")

    dim: Literal[1, 2]
    origin: List[float]
    cell_size: List[float]
    shape: List[int]
    values: List[float]

    @field_validator("cell_size")
    @classmethod
    def positive_cells(cls, value: List[float]) -> List[float]:
        if any(h <= 0 for h in value):
            raise ValueError("cell sizes must be positive")
        return value

    @model_validator(mode="after")
    def check_shapes(self):
        if len(self.origin) != self.dim or len(self.shape) != self.dim:
            raise ValueError("origin and shape need one entry per axis")
        if len(self.cell_size) not in (1, self.dim):
            raise ValueError("cell_size needs one entry, or one per axis")
        expected = 1
        for count in self.shape:
            expected *= count
        if len(self.values) != expected:
            raise ValueError(f"shape {self.shape} needs {expected} values, got {len(self.values)}")
        return self


# ==========================================
# 2. Family Spec Schemas
# ==========================================
class TemplateSpec(BaseModel):
    kind: Literal["uniform", "triangular", "bump"]
    params: Dict[str, Any] = Field(default_factory=dict)


class WeightSpec(BaseModel):
    kind: Literal["uniform", "trunc_gauss", "poly"] = "uniform"
    params: Dict[str, Any] = Field(default_factory=dict)


class PhiSpec(BaseModel):
    """A_θ = A0 + Σ_k θ_k A[k], b_θ = b0 + Σ_k θ_k B[k]"""

    A0: List[List[float]]
    A: List[List[List[float]]]
    b0: List[float]
    B: List[List[float]]

    @model_validator(mode="after")
    def same_param_count(self):
        if len(self.A) != len(self.B):
            raise ValueError("A and B need one table entry per θ coordinate")
        return self


class FamilySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["shift", "location_scale", "affine"]
    # a built-in template or a path to a grid JSON file (relative to the spec file)
    template: Union[TemplateSpec, str]
    theta_box: List[List[float]]
    g: WeightSpec = Field(default_factory=WeightSpec)
    phi: Optional[PhiSpec] = None
    atoms_per_axis: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def phi_for_affine(self):
        if self.kind == "affine" and self.phi is None:
            raise ValueError("affine families need a phi table")
        if any(len(row) != 2 or row[1] < row[0] for row in self.theta_box):
            raise ValueError("theta_box rows must be [lo, hi] with lo <= hi")
        return self


# ==========================================
# 3. Experiment Output Schemas
# ==========================================
class RecordRow(BaseModel):
    n: int
    replicate: int
    seed: int
    d2: float

    model_config = ConfigDict(from_attributes=True)


class TimingRow(BaseModel):
    n: int
    replicate: int
    wall_time: float

    model_config = ConfigDict(from_attributes=True)


class AggregateRowSchema(BaseModel):
    n: int
    count: int
    mean: float
    q10: float
    median: float
    q90: float

    model_config = ConfigDict(from_attributes=True)


class SlopeSummary(BaseModel):
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    expected_low: float = -1.2
    expected_high: float = -0.8
    ok: bool
    checksum: str


class EnvelopeRowSchema(BaseModel):
    n: int
    t: float
    frequency: float
    bound: float
    ok: bool

    model_config = ConfigDict(from_attributes=True)


class ComparisonRow(BaseModel):
    n: int
    seed: int
    mean_shift: float
    l1_to_convolution: float
    l1_to_template: float
    l1_convolution_template: float
    w2_to_template: float

    model_config = ConfigDict(from_attributes=True)


# ==========================================
# 4. Stored Run Schemas
# ==========================================
class ExperimentRunRead(BaseModel):
    id: int
    family_kind: str
    seed: int
    slope: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    checksum: str
    status: str
    created_at: datetime

    model_config = ConfigDict(from_attributes=True)
