"""
Axial field of the cuboid external permanent magnet (EPM).

The magnet is modelled as two uniformly charged pole faces (surface density
Br/mu0 on the N face at z = +zm/2 and -Br/mu0 on the S face at z = -zm/2).
The on-axis H_z is the surface integral of the Coulomb kernel over both faces,
evaluated by tensor-product Gauss-Legendre quadrature. An arctangent closed
form and a point-dipole formula serve as independent checks.

All quantities are SI (meters, tesla, A/m).
"""

import logging
import math
from typing import Iterable, List

import numpy as np
from scipy import special

from magbend.core.exceptions import ArgumentError, DomainError
from magbend.models.schemas import MU0, AxialPoint, CuboidMagnet, FieldValue

logger = logging.getLogger(__name__)

MIN_ORDER = 4


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ArgumentError(f"{name} must be finite, got {value}")


def _check_magnet(magnet: CuboidMagnet) -> None:
    _check_finite(xm=magnet.xm, ym=magnet.ym, zm=magnet.zm, br=magnet.br)


def gauss_legendre(order: int, lower: float, upper: float):
    """Nodes and weights of an order-point Gauss-Legendre rule mapped to [lower, upper]."""
    t, w = special.roots_legendre(order)
    half = 0.5 * (upper - lower)
    return half * t + 0.5 * (upper + lower), half * w


def _face_kernel_integral(magnet: CuboidMagnet, point: AxialPoint, order: int) -> float:
    """Integral of the two-face kernel over the pole faces for unit remanence."""
    xs, wx = gauss_legendre(order, -0.5 * magnet.xm, 0.5 * magnet.xm)
    ys, wy = gauss_legendre(order, -0.5 * magnet.ym, 0.5 * magnet.ym)
    x, y = np.meshgrid(xs, ys, indexing="ij")
    weights = np.outer(wx, wy)

    dz_n = point.z0 - 0.5 * magnet.zm
    dz_s = point.z0 + 0.5 * magnet.zm
    # both faces use (y0 - y): the S face is the N face shifted by -zm, not mirrored in y
    lateral = (point.x0 - x) ** 2 + (point.y0 - y) ** 2
    r_n = np.sqrt(lateral + dz_n ** 2)
    r_s = np.sqrt(lateral + dz_s ** 2)
    delta_r = dz_n / r_n ** 3 - dz_s / r_s ** 3
    return float(np.sum(weights * delta_r))


def hz_quadrature(magnet: CuboidMagnet, point: AxialPoint, order: int = 32) -> FieldValue:
    """
    Axial field H_z at an exterior point above the N pole face.

    Args:
        magnet: Magnet geometry and remanence
        point: Evaluation point, origin at the magnet center
        order: Gauss-Legendre points per axis on each face

    Raises:
        DomainError: If the point is not above the N pole face
        ArgumentError: If inputs are non-finite or order < 4
    """
    _check_magnet(magnet)
    _check_finite(x0=point.x0, y0=point.y0, z0=point.z0)
    if order < MIN_ORDER:
        raise ArgumentError(f"Quadrature order must be >= {MIN_ORDER}, got {order}")
    if point.z0 <= 0.5 * magnet.zm:
        raise DomainError(
            f"Point z0={point.z0:.6g} m is not outside the magnet (N face at z={0.5 * magnet.zm:.6g} m)"
        )

    kernel = _face_kernel_integral(magnet, point, order)
    h = magnet.br * kernel / (4.0 * math.pi * MU0)
    return FieldValue.from_h(h)


def hz_closed_form(magnet: CuboidMagnet, z: float) -> FieldValue:
    """On-axis field at distance z from the N pole face (arctangent closed form)."""
    _check_magnet(magnet)
    _check_finite(z=z)
    if z <= 0:
        raise DomainError(f"Distance from the pole face must be positive, got {z}")

    a = 0.5 * magnet.xm
    b = 0.5 * magnet.ym

    def solid_angle_term(d: float) -> float:
        return math.atan(a * b / (d * math.sqrt(a * a + b * b + d * d)))

    b_field = magnet.br / math.pi * (solid_angle_term(z) - solid_angle_term(z + magnet.zm))
    return FieldValue.from_h(b_field / MU0)


def dipole_far_field(magnet: CuboidMagnet, z_center: float) -> FieldValue:
    """Point-dipole on-axis field at distance z_center from the magnet center."""
    _check_magnet(magnet)
    _check_finite(z_center=z_center)
    if z_center <= 0:
        raise DomainError(f"Distance from the magnet center must be positive, got {z_center}")
    moment = magnet.br * magnet.volume / MU0
    b_field = MU0 * moment / (2.0 * math.pi * z_center ** 3)
    return FieldValue.from_h(b_field / MU0)


def field_at_pole_distance(magnet: CuboidMagnet, distance: float, order: int = 32) -> FieldValue:
    """hz_quadrature on the axis, with distance measured from the N pole face."""
    if distance <= 0:
        raise DomainError(f"Distance from the pole face must be positive, got {distance}")
    return hz_quadrature(magnet, AxialPoint(z0=0.5 * magnet.zm + distance), order)


def axial_profile(magnet: CuboidMagnet, distances: Iterable[float], order: int = 32) -> List[FieldValue]:
    """Field at several distances from the N pole face."""
    return [field_at_pole_distance(magnet, d, order) for d in distances]


def calibrate_remanence(
    magnet: CuboidMagnet,
    distance_from_pole: float,
    measured_b: float,
    order: int = 32,
) -> float:
    """
    Remanence that reproduces a probe reading at a distance from the N pole face.

    The field is linear in Br, so the answer is one division by the field of
    the same geometry at unit remanence. The magnet's own br is ignored.

    Raises:
        DomainError: On non-positive inputs or a vanishing geometric kernel
    """
    _check_magnet(magnet)
    _check_finite(distance_from_pole=distance_from_pole, measured_b=measured_b)
    if measured_b <= 0:
        raise DomainError(f"Measured flux density must be positive, got {measured_b}")
    if distance_from_pole <= 0:
        raise DomainError(f"Probe distance must be positive, got {distance_from_pole}")

    unit = magnet.model_copy(update={"br": 1.0})
    kernel_b = field_at_pole_distance(unit, distance_from_pole, order).b
    if kernel_b == 0.0 or not math.isfinite(kernel_b):
        raise DomainError(f"Geometric kernel vanishes for magnet {magnet.xm}x{magnet.ym}x{magnet.zm} m")

    br = measured_b / kernel_b
    logger.debug(f"Calibrated Br={br:.6f} T from {measured_b * 1e3:.3f} mT at {distance_from_pole * 1e3:.1f} mm")
    return br


def uniform_field(magnitude: float, angle: float) -> np.ndarray:
    """Planar field vector (B cos a, B sin a), a measured from the undeformed rod axis."""
    if magnitude < 0:
        raise ArgumentError(f"Field magnitude must be non-negative, got {magnitude}")
    return np.array([magnitude * math.cos(angle), magnitude * math.sin(angle)])
