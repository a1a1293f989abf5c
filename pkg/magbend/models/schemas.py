from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List, Optional, Dict, Any, Union, Literal, Tuple
import math

MU0 = 4.0 * math.pi * 1e-7  # T*m/A

SECTION_LABELS = ("bottom", "middle", "top")


# Permanent Magnet Models
class CuboidMagnet(BaseModel):
    """Axially (+z) magnetized cuboid; side lengths in meters, remanence in tesla."""
    xm: float = Field(..., gt=0, description="Side length along x, meters")
    ym: float = Field(..., gt=0, description="Side length along y, meters")
    zm: float = Field(..., gt=0, description="Side length along the magnetization axis, meters")
    br: float = Field(0.0, ge=0, description="Remanent flux density, tesla")

    class Config:
        frozen = True

    @classmethod
    def cube(cls, side: float, br: float = 0.0) -> "CuboidMagnet":
        return cls(xm=side, ym=side, zm=side, br=br)

    @property
    def volume(self) -> float:
        return self.xm * self.ym * self.zm


class AxialPoint(BaseModel):
    """Evaluation point with the origin at the magnet center, z along the magnetization."""
    x0: float = Field(0.0, description="x coordinate, meters")
    y0: float = Field(0.0, description="y coordinate, meters")
    z0: float = Field(..., description="z coordinate, meters")

    class Config:
        frozen = True


class FieldValue(BaseModel):
    """Field strength H (A/m) paired with flux density B (T); always B = mu0 * H."""
    h: float = Field(..., description="Magnetic field strength, A/m")
    b: float = Field(..., description="Flux density, tesla")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_pairing(self) -> "FieldValue":
        if not math.isclose(self.b, MU0 * self.h, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError(f"b={self.b} T is not mu0*h for h={self.h} A/m")
        return self

    @classmethod
    def from_h(cls, h: float) -> "FieldValue":
        return cls(h=h, b=MU0 * h)

    @classmethod
    def from_b(cls, b: float) -> "FieldValue":
        return cls(h=b / MU0, b=MU0 * (b / MU0))

    @property
    def b_mT(self) -> float:
        return self.b * 1e3


# Rod Models
class Section(BaseModel):
    length: float = Field(..., gt=0, description="Section length, meters")
    youngs_modulus: float = Field(..., ge=1e6, le=1e8, description="Young's modulus, pascals")
    label: Literal["bottom", "middle", "top"]

    class Config:
        frozen = True


class RodSpec(BaseModel):
    """Three-section graded-stiffness continuum, SI units."""
    name: str = Field(..., description="Spec identifier")
    sections: Tuple[Section, Section, Section] = Field(..., description="Sections ordered bottom to top")
    cross_section_side: float = Field(..., gt=0, description="Square cross-section side, meters")
    residual_flux: float = Field(..., ge=0, description="Material remanence, tesla")
    ndfeb_weight_ratio: Optional[float] = Field(None, description="NdFeB weight ratio in percent (informational)")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_grading(self) -> "RodSpec":
        labels = tuple(s.label for s in self.sections)
        if labels != SECTION_LABELS:
            raise ValueError(f"Sections must be ordered {SECTION_LABELS}, got {labels}")
        moduli = [s.youngs_modulus for s in self.sections]
        if any(upper > lower for lower, upper in zip(moduli, moduli[1:])):
            raise ValueError(f"Stiffness must not increase from bottom to top: {moduli}")
        return self

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.sections)

    @property
    def moduli(self) -> Tuple[float, float, float]:
        return tuple(s.youngs_modulus for s in self.sections)

    @property
    def lengths(self) -> Tuple[float, float, float]:
        return tuple(s.length for s in self.sections)

    def _replace(self, **changes) -> "RodSpec":
        # validated copy; model_copy skips the grading check
        return RodSpec(**{**dict(self), **changes})

    def with_moduli(self, moduli, name: Optional[str] = None) -> "RodSpec":
        sections = tuple(
            Section(length=s.length, youngs_modulus=e, label=s.label) for s, e in zip(self.sections, moduli)
        )
        return self._replace(sections=sections, name=name or self.name)

    def with_lengths(self, lengths, name: Optional[str] = None) -> "RodSpec":
        sections = tuple(
            Section(length=length, youngs_modulus=s.youngs_modulus, label=s.label)
            for s, length in zip(self.sections, lengths)
        )
        return self._replace(sections=sections, name=name or self.name)

    def with_side(self, side: float, name: Optional[str] = None) -> "RodSpec":
        return self._replace(cross_section_side=side, name=name or self.name)

    def with_residual_flux(self, residual_flux: float, name: Optional[str] = None) -> "RodSpec":
        return self._replace(residual_flux=residual_flux, name=name or self.name)


class SectionFile(BaseModel):
    length_mm: float = Field(..., gt=0, description="Section length in mm")
    e_MPa: float = Field(..., gt=0, description="Young's modulus in MPa")


class RodSpecFile(BaseModel):
    """On-disk RodSpec schema (mm, MPa, mT)."""
    name: str
    sections: List[SectionFile] = Field(..., min_length=3, max_length=3)
    side_mm: float = Field(..., gt=0)
    residual_flux_mT: float = Field(..., ge=0)
    ndfeb_weight_ratio: Optional[float] = None

    def to_spec(self) -> RodSpec:
        return RodSpec(
            name=self.name,
            sections=tuple(
                Section(length=s.length_mm * 1e-3, youngs_modulus=s.e_MPa * 1e6, label=label)
                for s, label in zip(self.sections, SECTION_LABELS)
            ),
            cross_section_side=self.side_mm * 1e-3,
            residual_flux=self.residual_flux_mT * 1e-3,
            ndfeb_weight_ratio=self.ndfeb_weight_ratio,
        )

    @classmethod
    def from_spec(cls, spec: RodSpec) -> "RodSpecFile":
        return cls(
            name=spec.name,
            sections=[SectionFile(length_mm=s.length * 1e3, e_MPa=s.youngs_modulus * 1e-6) for s in spec.sections],
            side_mm=spec.cross_section_side * 1e3,
            residual_flux_mT=spec.residual_flux * 1e3,
            ndfeb_weight_ratio=spec.ndfeb_weight_ratio,
        )


class SolverOptions(BaseModel):
    continuation_steps: int = Field(20, ge=1, description="Equal field increments from 0 to target")
    tol: float = Field(1e-10, gt=0, description="Max-norm gradient tolerance, N*m")
    max_iters: int = Field(500, ge=1, description="Newton iterations per continuation step")
    max_halvings: int = Field(40, ge=1, description="Step-length halvings before falling back to a gradient step")


# Surrogate Models
class BendSample(BaseModel):
    """One (field, moduli, lengths, side) -> fitted coefficient record, SI units."""
    mt: float = Field(..., ge=0, description="Field strength, tesla")
    e: Tuple[float, float, float] = Field(..., description="Young's modulus triple, pascals")
    l: Tuple[float, float, float] = Field(..., description="Unit-length triple, meters")
    cs: float = Field(..., gt=0, description="Cross-section side, meters")
    a_hat: float = Field(..., description="Fitted quadratic coefficient, 1/m")
    spec_id: Optional[str] = Field(None, description="Source spec id, if known")

    class Config:
        frozen = True

    @field_validator("e", "l")
    @classmethod
    def check_positive(cls, value):
        if any(v <= 0 for v in value):
            raise ValueError(f"All values must be positive, got {value}")
        return value

    @field_validator("a_hat")
    @classmethod
    def check_finite(cls, value):
        if not math.isfinite(value):
            raise ValueError("a_hat must be finite")
        return value

    @property
    def design_key(self) -> Tuple:
        return tuple(round(v, 12) for v in (*self.e, *self.l, self.cs))


class TrainOptions(BaseModel):
    lr: float = Field(1e-3, gt=0, description="Adam learning rate")
    epochs: int = Field(5000, description="Full-batch epochs")
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)


class TrainReport(BaseModel):
    loss_history: List[float] = Field(..., description="Mean L1 loss per epoch, before the update")
    final_train_mse: float = Field(..., ge=0, description="Train MSE, normalized-coefficient units")
    test_mse: Optional[float] = Field(None, ge=0, description="Held-out MSE, normalized-coefficient units")
    epochs: int
    learning_rate: float
    best_epoch: int
    best_loss: float
    final_loss: float


# Pipeline Models
class LibraryRecord(BaseModel):
    spec_id: str
    field_mT: float
    angle_deg: float
    a_per_mm: float
    radius_mm: float
    converged: bool
    iterations: int


class SweepGrid(BaseModel):
    specs: List[Union[str, RodSpecFile]] = Field(..., description="Bundled spec ids, file paths or inline specs")
    fields_mT: List[float] = Field(..., description="Field strengths in mT")
    angles_deg: List[float] = Field(default_factory=lambda: [90.0], description="Field angles to the rod axis")
    resolution: float = Field(2.0, gt=0, description="Segments per mm")
    solver: SolverOptions = Field(default_factory=SolverOptions)
    workers: int = Field(1, ge=1, description="Worker threads")


# HTTP request/response models
class FieldCalibration(BaseModel):
    distance_mm: float = Field(..., gt=0, description="Probe distance from the N pole face")
    measured_mT: float = Field(..., gt=0, description="Probe reading")


class FieldRequest(BaseModel):
    side_mm: float = Field(55.0, gt=0, description="Cube side length")
    br_T: Optional[float] = Field(None, ge=0, description="Remanence; omit when calibrating")
    calibrate: Optional[FieldCalibration] = None
    distance_mm: float = Field(..., gt=0, description="Evaluation distance from the N pole face")
    order: int = Field(32, ge=4, description="Gauss-Legendre order per axis")


class FieldResponse(BaseModel):
    h_A_per_m: float
    b_mT: float
    br_T: float


class SolveRequest(BaseModel):
    spec: Optional[RodSpecFile] = Field(None, description="Inline rod spec")
    spec_id: Optional[str] = Field(None, description="Bundled spec id, e.g. gmc-2")
    field_mT: float = Field(..., ge=0)
    angle_deg: float = Field(90.0)
    resolution: float = Field(2.0, gt=0)


class SolveResponse(BaseModel):
    name: str
    converged: bool
    gradient_norm: float
    iterations: int
    continuation_steps_used: int
    segment_length_mm: float
    angles: List[float]
    centerline_mm: List[Tuple[float, float]]
    bending_energy_J: float
    zeeman_energy_J: float
    a_per_mm: Optional[float]
    radius_mm: Optional[float]


class FitRequest(BaseModel):
    points_mm: List[Tuple[float, float]] = Field(..., min_length=3)
    metric: Literal["quad", "radius", "curvature"] = "quad"


class PredictRequest(BaseModel):
    mt_mT: float = Field(..., ge=0)
    e_MPa: Tuple[float, float, float]
    l_mm: Tuple[float, float, float]
    cs_mm: float = Field(..., gt=0)


class PredictResponse(BaseModel):
    a_per_mm: float


# Error Response
class ErrorResponse(BaseModel):
    error: bool = True
    message: str
    details: Optional[Dict[str, Any]] = None


# Surrogate model file
class LayerFile(BaseModel):
    shape: Tuple[int, int] = Field(..., description="(fan_in, fan_out)")
    weights: List[float] = Field(..., description="Row-major weight matrix")
    bias: List[float]

    @model_validator(mode="after")
    def check_sizes(self) -> "LayerFile":
        fan_in, fan_out = self.shape
        if len(self.weights) != fan_in * fan_out or len(self.bias) != fan_out:
            raise ValueError(f"Layer arrays do not match shape {self.shape}")
        if not all(math.isfinite(v) for v in (*self.weights, *self.bias)):
            raise ValueError("Layer weights must be finite")
        return self


class NormalizerFile(BaseModel):
    minimum: List[float]
    span: List[float]


class SurrogateFile(BaseModel):
    format_version: int = Field(1, description="Model file format version")
    seed: int
    architecture: Dict[str, Any]
    layers: Dict[str, LayerFile]
    input_normalizer: Optional[NormalizerFile] = None
    target_normalizer: Optional[NormalizerFile] = None
    units: Dict[str, str] = Field(default_factory=dict)


class PredictionRecord(BaseModel):
    spec_id: str
    field_mT: float
    a_per_mm: float
