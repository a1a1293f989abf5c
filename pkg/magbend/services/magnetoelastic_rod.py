"""
Planar magneto-elastic equilibrium of a three-section graded rod.

The rod is a discrete elastica: n rigid segments of length l joined by elastic
hinges, clamped at the origin. Segment i has absolute tangent angle theta_i and
carries a magnetic moment m_i frozen along its tangent. In a uniform field B
the total energy is

    U_b = sum_j 1/2 k_j (theta_j - theta_{j-1})^2 / l    (theta_{-1} = base angle)
    U_z = -sum_i m_i (cos theta_i, sin theta_i) . B

and equilibria are found by ramping |B| from zero (continuation) with a
damped Newton method on the tridiagonal Hessian.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy import linalg

from magbend.core.exceptions import ArgumentError, ConfigurationError, StorageError
from magbend.models.schemas import MU0, RodSpec, RodSpecFile, SolverOptions
from magbend.services.epm_field import uniform_field

logger = logging.getLogger(__name__)

MIN_SEGMENTS_PER_SECTION = 3
MAX_SEGMENTS = 100_000
LENGTH_GRID = 1e-9  # section lengths are resolved on a 1 nm grid
TIE_BREAK_PERTURBATION = 1e-6
SEMIDEFINITE_RTOL = 1e-12
SPECS_DIR = Path(__file__).resolve().parent.parent / "data" / "specs"


@dataclass(frozen=True)
class DiscreteRod:
    spec: RodSpec
    segment_length: float
    stiffness: np.ndarray  # k_i = E_i * I per segment, N*m^2
    moments: np.ndarray  # m_i per segment, A*m^2
    section_index: np.ndarray  # 0 bottom, 1 middle, 2 top
    base_angle: float = 0.0

    @property
    def n_segments(self) -> int:
        return int(self.stiffness.size)

    @property
    def total_length(self) -> float:
        return self.n_segments * self.segment_length

    @property
    def joint_stiffness(self) -> np.ndarray:
        """Hinge stiffness per joint; joint 0 is the clamp, joint j couples segments j-1 and j."""
        k = self.stiffness
        joints = np.empty_like(k)
        joints[0] = k[0]
        # series springs across a section boundary, plain k inside a section
        joints[1:] = 2.0 * k[:-1] * k[1:] / (k[:-1] + k[1:])
        return joints

    def with_base_angle(self, base_angle: float) -> "DiscreteRod":
        return replace(self, base_angle=base_angle)


@dataclass(frozen=True)
class Equilibrium:
    joint_angles: np.ndarray
    centerline: np.ndarray  # (n + 1, 2), meters
    bending_energy: float
    zeeman_energy: float
    gradient_norm: float
    converged: bool
    continuation_steps_used: int
    iterations: int
    field: np.ndarray  # applied field vector, tesla
    segment_length: float
    base_angle: float = 0.0

    @property
    def total_energy(self) -> float:
        return self.bending_energy + self.zeeman_energy

    @property
    def tip(self) -> np.ndarray:
        return self.centerline[-1]


def _segment_grid(lengths: Tuple[float, ...], resolution: float) -> Tuple[float, np.ndarray]:
    """Largest segment length <= 1/resolution (mm) dividing every section length."""
    ticks = []
    for length in lengths:
        count = round(length / LENGTH_GRID)
        if count <= 0 or abs(count * LENGTH_GRID - length) > 1e-9 * length:
            raise ConfigurationError(
                f"Section length {length!r} m does not resolve on a {LENGTH_GRID:g} m grid; "
                f"choose lengths with rational ratios (e.g. whole micrometers)"
            )
        ticks.append(count)

    common = math.gcd(*ticks)
    max_ticks = 1e-3 / resolution / LENGTH_GRID
    divisions = max(1, math.ceil(common / max_ticks - 1e-9))
    shortest = min(ticks)
    divisions = max(divisions, math.ceil(MIN_SEGMENTS_PER_SECTION * common / shortest))

    counts = np.array([t // common * divisions for t in ticks])
    if counts.sum() > MAX_SEGMENTS:
        raise ConfigurationError(
            f"Section lengths {lengths} need {counts.sum()} segments to divide exactly "
            f"(limit {MAX_SEGMENTS}); their ratios are too far from simple fractions"
        )
    return common * LENGTH_GRID / divisions, counts


def build_rod(spec: RodSpec, resolution: float = 2.0, base_angle: float = 0.0) -> DiscreteRod:
    """
    Discretize a RodSpec into uniform segments.

    Args:
        spec: Three-section rod description
        resolution: Upper bound on segments per millimeter
        base_angle: Clamp direction in radians

    Returns:
        DiscreteRod whose section boundaries fall on segment boundaries
    """
    if not resolution > 0:
        raise ArgumentError(f"Resolution must be positive, got {resolution}")

    segment_length, counts = _segment_grid(spec.lengths, resolution)
    section_index = np.repeat(np.arange(3), counts)
    second_moment = spec.cross_section_side ** 4 / 12.0
    moduli = np.array(spec.moduli)[section_index]
    magnetization = spec.residual_flux / MU0
    moment = magnetization * spec.cross_section_side ** 2 * segment_length

    rod = DiscreteRod(
        spec=spec,
        segment_length=segment_length,
        stiffness=moduli * second_moment,
        moments=np.full(section_index.size, moment),
        section_index=section_index,
        base_angle=base_angle,
    )
    logger.debug(
        f"Built rod {spec.name}: {rod.n_segments} segments of {segment_length * 1e3:.4g} mm "
        f"(sections {counts.tolist()})"
    )
    return rod


def _check_angles(rod: DiscreteRod, angles) -> np.ndarray:
    theta = np.asarray(angles, dtype=float)
    if theta.ndim != 1 or theta.size != rod.n_segments:
        raise ArgumentError(f"Expected {rod.n_segments} angles, got shape {theta.shape}")
    return theta


def _joint_differences(rod: DiscreteRod, theta: np.ndarray) -> np.ndarray:
    return np.diff(theta, prepend=rod.base_angle)


def bending_energy(rod: DiscreteRod, angles) -> float:
    theta = _check_angles(rod, angles)
    d = _joint_differences(rod, theta)
    return float(0.5 * np.sum(rod.joint_stiffness * d * d) / rod.segment_length)


def zeeman_energy(rod: DiscreteRod, angles, field) -> float:
    theta = _check_angles(rod, angles)
    bx, by = np.asarray(field, dtype=float)
    return float(-np.sum(rod.moments * (np.cos(theta) * bx + np.sin(theta) * by)))


def total_energy(rod: DiscreteRod, angles, field) -> float:
    return bending_energy(rod, angles) + zeeman_energy(rod, angles, field)


def energy_gradient(rod: DiscreteRod, angles, field) -> np.ndarray:
    """Analytic gradient of U_b + U_z with respect to the segment angles (N*m)."""
    theta = _check_angles(rod, angles)
    bx, by = np.asarray(field, dtype=float)
    moment_at_joint = rod.joint_stiffness * _joint_differences(rod, theta) / rod.segment_length
    grad = moment_at_joint.copy()
    grad[:-1] -= moment_at_joint[1:]
    grad += rod.moments * (np.sin(theta) * bx - np.cos(theta) * by)
    return grad


def _hessian_bands(rod: DiscreteRod, theta: np.ndarray, field) -> Tuple[np.ndarray, np.ndarray]:
    bx, by = np.asarray(field, dtype=float)
    c = rod.joint_stiffness / rod.segment_length
    diag = c.copy()
    diag[:-1] += c[1:]
    diag += rod.moments * (np.cos(theta) * bx + np.sin(theta) * by)
    return diag, -c[1:]


def energy_hessian(rod: DiscreteRod, angles, field) -> np.ndarray:
    """Dense tridiagonal Hessian of the total energy."""
    theta = _check_angles(rod, angles)
    diag, off = _hessian_bands(rod, theta, field)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _banded_cholesky(diag: np.ndarray, off: np.ndarray):
    bands = np.vstack([np.concatenate(([0.0], off)), diag])
    return linalg.cholesky_banded(bands)


def _is_positive_definite(diag: np.ndarray, off: np.ndarray) -> bool:
    try:
        _banded_cholesky(diag, off)
        return True
    except linalg.LinAlgError:
        return False


def _descent_direction(diag: np.ndarray, off: np.ndarray, grad: np.ndarray) -> Tuple[np.ndarray, float]:
    """Newton direction, with the diagonal shifted until the Hessian factors."""
    scale = max(float(np.max(np.abs(diag))), 1e-300)
    shift = 0.0
    for _ in range(64):
        try:
            factor = _banded_cholesky(diag + shift, off)
            return -linalg.cho_solve_banded((factor, False), grad), shift
        except linalg.LinAlgError:
            shift = scale * 1e-10 if shift == 0.0 else shift * 10.0
    return -grad / scale, shift


def _escape_saddle(rod: DiscreteRod, theta: np.ndarray, field: np.ndarray, energy: float, diag, off):
    """
    Classify a stationary point and step off it when it is a saddle.

    Returns ("minimum", theta, energy) when the Hessian is positive
    semidefinite up to rounding, ("escaped", trial, trial_energy) after a
    descent step along the lowest mode, and ("stuck", theta, energy) when no
    step along that mode lowers the energy.
    """
    if _is_positive_definite(diag, off):
        return "minimum", theta, energy
    values, vectors = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    scale = max(float(np.max(np.abs(diag))), 1e-300)
    if values[0] >= -SEMIDEFINITE_RTOL * scale:
        return "minimum", theta, energy
    direction = vectors[:, 0]
    if direction.sum() < 0:
        direction = -direction

    t = 1.0
    for _ in range(60):
        trial = theta + t * direction
        trial_energy = total_energy(rod, trial, field)
        if trial_energy < energy:
            return "escaped", trial, trial_energy
        t *= 0.5
    return "stuck", theta, energy


def _minimize(rod: DiscreteRod, theta: np.ndarray, field: np.ndarray, opts: SolverOptions):
    """Damped Newton at a fixed field. Returns (theta, gradient max-norm, converged, iterations)."""
    energy = total_energy(rod, theta, field)
    grad = energy_gradient(rod, theta, field)
    gnorm = float(np.max(np.abs(grad)))

    for iteration in range(opts.max_iters):
        diag, off = _hessian_bands(rod, theta, field)
        if gnorm < opts.tol:
            kind, theta, energy = _escape_saddle(rod, theta, field, energy, diag, off)
            if kind == "minimum":
                return theta, gnorm, True, iteration
            if kind == "stuck":
                logger.debug(f"Saddle at iteration {iteration} has no descent along its lowest mode")
                return theta, gnorm, False, iteration
            logger.debug(f"Stationary point is a saddle at iteration {iteration}, following negative curvature")
            grad = energy_gradient(rod, theta, field)
            gnorm = float(np.max(np.abs(grad)))
            continue

        step, shift = _descent_direction(diag, off, grad)
        if shift > 0.0:
            logger.debug(f"Hessian not positive definite, shifted diagonal by {shift:.3e}")

        slack = 64.0 * np.finfo(float).eps * max(abs(energy), 1e-300)
        accepted = False
        t = 1.0
        for _ in range(opts.max_halvings):
            trial = theta + t * step
            trial_energy = total_energy(rod, trial, field)
            if trial_energy <= energy + slack:
                accepted = True
                break
            t *= 0.5

        if not accepted:
            # last resort: a short steepest-descent step scaled by the hinge stiffness
            trial = theta - grad / max(float(np.max(diag)), 1e-300)
            trial_energy = total_energy(rod, trial, field)
            if trial_energy > energy + slack:
                logger.debug(f"No descent step found at iteration {iteration}, |g|={gnorm:.3e}")
                return theta, gnorm, False, iteration + 1

        theta, energy = trial, trial_energy
        grad = energy_gradient(rod, theta, field)
        gnorm = float(np.max(np.abs(grad)))

    converged = False
    if gnorm < opts.tol:
        diag, off = _hessian_bands(rod, theta, field)
        converged = _escape_saddle(rod, theta, field, energy, diag, off)[0] == "minimum"
    return theta, gnorm, converged, opts.max_iters


def centerline(rod: DiscreteRod, angles) -> np.ndarray:
    """Forward kinematics: n + 1 points from the clamped origin."""
    theta = _check_angles(rod, angles)
    steps = rod.segment_length * np.column_stack((np.cos(theta), np.sin(theta)))
    points = np.zeros((rod.n_segments + 1, 2))
    points[1:] = np.cumsum(steps, axis=0)
    return points


def _equilibrium(rod, theta, field, gnorm, converged, steps_used, iterations) -> Equilibrium:
    return Equilibrium(
        joint_angles=theta,
        centerline=centerline(rod, theta),
        bending_energy=bending_energy(rod, theta),
        zeeman_energy=zeeman_energy(rod, theta, field),
        gradient_norm=gnorm,
        converged=converged,
        continuation_steps_used=steps_used,
        iterations=iterations,
        field=np.asarray(field, dtype=float),
        segment_length=rod.segment_length,
        base_angle=rod.base_angle,
    )


def solve_equilibrium(
    rod: DiscreteRod,
    field_magnitude: float,
    field_angle: float = math.pi / 2,
    opts: Optional[SolverOptions] = None,
) -> Equilibrium:
    """
    Equilibrium shape of the rod in a uniform field.

    The field is ramped from zero to the target in opts.continuation_steps
    equal increments; each increment is solved by damped Newton warm-started
    from the previous one. The field angle is measured in the lab frame, which
    coincides with the undeformed rod axis when base_angle is 0.

    Non-convergence is reported through Equilibrium.converged, never raised.
    """
    opts = opts or SolverOptions()
    if not field_magnitude >= 0:
        raise ArgumentError(f"Field magnitude must be non-negative, got {field_magnitude}")

    start_time = time.time()
    theta = np.full(rod.n_segments, rod.base_angle, dtype=float)
    target = uniform_field(field_magnitude, field_angle)

    if field_magnitude == 0.0:
        grad = energy_gradient(rod, theta, target)
        return _equilibrium(rod, theta, target, float(np.max(np.abs(grad))), True, 0, 0)

    iterations = 0
    converged = True
    gnorm = math.inf
    for step in range(1, opts.continuation_steps + 1):
        field = target * (step / opts.continuation_steps)

        grad = energy_gradient(rod, theta, field)
        if float(np.max(np.abs(grad))) < opts.tol:
            diag, off = _hessian_bands(rod, theta, field)
            if not _is_positive_definite(diag, off):
                logger.debug("Unstable aligned configuration, perturbing angles by +1e-6 rad")
                theta = theta + TIE_BREAK_PERTURBATION

        theta, gnorm, step_converged, used = _minimize(rod, theta, field, opts)
        iterations += used
        converged = converged and step_converged
        if not step_converged:
            logger.warning(
                f"Continuation step {step}/{opts.continuation_steps} for {rod.spec.name} did not converge "
                f"(|g|={gnorm:.3e} N*m after {used} iterations)"
            )

    duration = time.time() - start_time
    logger.debug(
        f"Solved {rod.spec.name} at {field_magnitude * 1e3:.2f} mT in {duration:.3f}s "
        f"({iterations} Newton iterations, converged={converged})"
    )
    return _equilibrium(rod, theta, target, gnorm, converged, opts.continuation_steps, iterations)


def bundled_spec_ids() -> List[str]:
    """Ids of the rod specs shipped with the package, e.g. gmc-1 ... gmc-7."""
    return sorted(p.stem for p in SPECS_DIR.glob("*.json"))


def parse_spec(payload: Union[dict, RodSpecFile], source: str = "<inline>") -> RodSpec:
    """Validate an on-disk style spec (mm, MPa, mT) into a RodSpec."""
    try:
        spec_file = payload if isinstance(payload, RodSpecFile) else RodSpecFile.model_validate(payload)
        return spec_file.to_spec()
    except ValidationError as e:
        raise ConfigurationError(f"Invalid rod spec {source}: {e}") from e


def load_spec(id_or_path: Union[str, Path]) -> RodSpec:
    """
    Resolve a bundled spec id or a path to a RodSpec JSON file.

    Raises:
        ConfigurationError: Unknown id or invalid file contents
        StorageError: The file exists but cannot be read
    """
    path = Path(id_or_path)
    if not path.suffix and str(id_or_path) in bundled_spec_ids():
        path = SPECS_DIR / f"{id_or_path}.json"
    if not path.is_file():
        raise ConfigurationError(
            f"Unknown rod spec {str(id_or_path)!r}; expected a JSON file or one of {bundled_spec_ids()}"
        )
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(path, str(e)) from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid rod spec {path}: {e}") from e
    return parse_spec(payload, source=str(path))
