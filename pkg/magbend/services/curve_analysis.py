"""
Scalar descriptors of bent centerlines.

Curves come from the equilibrium solver or from photographs. Every curve is
root-aligned first: the clamped end is moved to the origin and the clamp
direction is rotated onto +x, so that a flat start maps to y = a x^2 with no
linear or constant term.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from magbend.core.exceptions import ArgumentError, ConfigurationError, DegenerateFitError, StorageError
from magbend.services.magnetoelastic_rod import DiscreteRod, Equilibrium

logger = logging.getLogger(__name__)

COLLINEAR_RCOND = 1e-12


class CurveSource(str, Enum):
    SIMULATION = "simulation"
    IMAGE = "image"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class Curve2D:
    """Ordered planar points in meters, first point at the clamped root."""
    points: np.ndarray
    source: CurveSource = CurveSource.SYNTHETIC
    base_angle: float = 0.0

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ArgumentError(f"Curve points must have shape (n, 2), got {points.shape}")
        if points.shape[0] < 3:
            raise ArgumentError(f"A curve needs at least 3 points, got {points.shape[0]}")
        if not np.all(np.isfinite(points)):
            raise ArgumentError("Curve points must be finite")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def points_mm(self) -> np.ndarray:
        return self.points * 1e3


@dataclass(frozen=True)
class QuadraticFit:
    a: float  # 1/m
    rms_residual: float  # m
    n_points: int

    @property
    def a_per_mm(self) -> float:
        return self.a * 1e-3


def curve_from_points_mm(points_mm, source: CurveSource = CurveSource.SYNTHETIC, base_angle: float = 0.0) -> Curve2D:
    return Curve2D(points=np.asarray(points_mm, dtype=float) * 1e-3, source=source, base_angle=base_angle)


def curve_from_equilibrium(equilibrium: Equilibrium) -> Curve2D:
    return Curve2D(points=equilibrium.centerline, source=CurveSource.SIMULATION, base_angle=equilibrium.base_angle)


def root_align(curve: Curve2D) -> np.ndarray:
    """Points translated so the root is the origin and rotated by -base_angle."""
    shifted = curve.points - curve.points[0]
    c, s = math.cos(curve.base_angle), math.sin(curve.base_angle)
    rotation = np.array([[c, s], [-s, c]])
    return shifted @ rotation.T


def validate_for_fit(curve: Curve2D) -> np.ndarray:
    """Root-aligned points, requiring x to increase strictly along the curve."""
    aligned = root_align(curve)
    steps = np.diff(aligned[:, 0])
    if np.any(steps <= 0):
        first_bad = int(np.argmax(steps <= 0)) + 1
        raise ArgumentError(
            f"Curve x must increase strictly after root alignment (fails at point {first_bad} of {len(curve)})"
        )
    return aligned


def fit_quadratic(curve: Curve2D) -> QuadraticFit:
    """
    Least-squares coefficient of y = a x^2 through the root.

    The single-parameter normal equation gives a = sum(x^2 y) / sum(x^4).

    Raises:
        DegenerateFitError: If every x is zero
        ArgumentError: If x does not increase strictly after alignment
    """
    aligned = root_align(curve)
    x, y = aligned[:, 0], aligned[:, 1]
    x2 = x * x
    denominator = float(np.sum(x2 * x2))
    if denominator == 0.0:
        raise DegenerateFitError("All x coordinates are zero; the quadratic coefficient is undetermined")
    validate_for_fit(curve)

    a = float(np.sum(x2 * y)) / denominator
    residual = y - a * x2
    rms = float(np.sqrt(np.mean(residual * residual)))
    return QuadraticFit(a=a, rms_residual=rms, n_points=len(curve))


def bending_radius(curve: Curve2D) -> float:
    """
    Radius of the algebraic (Kasa) least-squares circle through the points.

    Solves 2 cx x + 2 cy y + c = x^2 + y^2 on mean-centered, scale-normalized
    coordinates. Collinear input returns math.inf.
    """
    points = curve.points
    center = points.mean(axis=0)
    centered = points - center
    scale = float(np.max(np.abs(centered)))
    if scale == 0.0:
        raise ArgumentError("All curve points coincide")
    u = centered / scale

    design = np.column_stack((2.0 * u[:, 0], 2.0 * u[:, 1], np.ones(len(u))))
    target = np.sum(u * u, axis=1)
    singular = np.linalg.svd(design, compute_uv=False)
    if singular[-1] <= COLLINEAR_RCOND * singular[0]:
        return math.inf

    (cx, cy, c), *_ = np.linalg.lstsq(design, target, rcond=None)
    radius_sq = c + cx * cx + cy * cy
    if radius_sq <= 0:
        return math.inf
    return float(math.sqrt(radius_sq) * scale)


def curvature_profile(equilibrium: Equilibrium) -> np.ndarray:
    """Per-joint curvature (1/m): base joint against the clamp, then between consecutive segments."""
    theta = np.asarray(equilibrium.joint_angles, dtype=float)
    return np.diff(theta, prepend=equilibrium.base_angle) / equilibrium.segment_length


def point_curvature(curve: Curve2D) -> np.ndarray:
    """Discrete curvature of a point curve: turning angle between chords over the mean chord length."""
    chords = np.diff(curve.points, axis=0)
    lengths = np.hypot(chords[:, 0], chords[:, 1])
    if np.any(lengths == 0):
        raise ArgumentError("Curve contains repeated consecutive points")
    headings = np.arctan2(chords[:, 1], chords[:, 0])
    turning = np.angle(np.exp(1j * np.diff(headings)))
    return turning / (0.5 * (lengths[:-1] + lengths[1:]))


def tip_deflection(curve: Curve2D) -> float:
    """Lateral offset of the last point in the root frame, meters."""
    return float(root_align(curve)[-1, 1])


def section_curvature_max(profile, rod: DiscreteRod, section: int) -> float:
    """Largest |curvature| over the joints of one section (0 bottom, 1 middle, 2 top)."""
    profile = np.asarray(profile, dtype=float)
    if profile.size != rod.n_segments:
        raise ArgumentError(f"Expected {rod.n_segments} curvature values, got {profile.size}")
    mask = rod.section_index == section
    if not np.any(mask):
        raise ArgumentError(f"Rod has no section {section}")
    return float(np.max(np.abs(profile[mask])))


def read_points_csv(path: Union[str, Path], source: CurveSource = CurveSource.SYNTHETIC) -> Curve2D:
    """Read x,y points in mm from a CSV file; a header line is optional."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(path, str(e)) from e

    lines = [line for line in text.splitlines() if line.strip()]
    if lines and not _is_numeric_row(lines[0]):
        lines = lines[1:]
    try:
        rows = [[float(v) for v in line.split(",")[:2]] for line in lines]
    except ValueError as e:
        raise ConfigurationError(f"{path}: expected numeric x,y columns ({e})") from e
    if any(len(row) != 2 for row in rows):
        raise ConfigurationError(f"{path}: every row needs x and y columns")

    logger.debug(f"Read {len(rows)} points from {path}")
    return curve_from_points_mm(np.array(rows).reshape(-1, 2), source=source)


def _is_numeric_row(line: str) -> bool:
    try:
        [float(v) for v in line.split(",")]
        return True
    except ValueError:
        return False


def describe(curve: Curve2D, metric: str = "quad") -> dict:
    """JSON-ready summary used by the CLI and the HTTP API."""
    if metric == "quad":
        fit = fit_quadratic(curve)
        return {"metric": "quad", "a_per_mm": fit.a_per_mm, "rms_residual_mm": fit.rms_residual * 1e3,
                "n_points": fit.n_points}
    if metric == "radius":
        radius = bending_radius(curve)
        return {"metric": "radius", "radius_mm": None if math.isinf(radius) else radius * 1e3}
    if metric == "curvature":
        kappa = point_curvature(curve)
        return {"metric": "curvature", "curvature_per_mm": (kappa * 1e-3).tolist()}
    raise ArgumentError(f"Unknown metric {metric!r}; expected quad, radius or curvature")
