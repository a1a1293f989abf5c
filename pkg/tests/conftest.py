import numpy as np
import pytest

from magbend.models.schemas import BendSample, RodSpec, Section
from magbend.services.magnetoelastic_rod import load_spec
from magbend.services.surrogate import DEFAULT_FIELDS_MT
from magbend.utils.pgm import GrayImage


DESIGNS = [
    ((20e6, 15e6, 10e6), (0.010, 0.010, 0.010), 1.30e-3),
    ((20e6, 15e6, 10e6), (0.010, 0.010, 0.010), 0.97e-3),
    ((20e6, 15e6, 10e6), (0.010, 0.010, 0.010), 0.80e-3),
    ((16e6, 12e6, 8e6), (0.010, 0.010, 0.010), 0.97e-3),
    ((14e6, 10e6, 7.5e6), (0.010, 0.010, 0.010), 0.97e-3),
    ((20e6, 15e6, 10e6), (0.020, 0.005, 0.005), 0.97e-3),
    ((20e6, 15e6, 10e6), (0.005, 0.005, 0.020), 0.97e-3),
]


def synthetic_a(mt, e, l, cs):
    """Smooth stand-in for the solver: grows with field and length, falls with stiffness."""
    compliance = sum(length / modulus for length, modulus in zip(l, e)) / 3.0
    return 2e12 * mt * compliance * (l[2] / 0.01) * (1e-3 / cs) ** 2 / (1.0 + 10.0 * mt)


def synthetic_samples(designs=DESIGNS, fields_mT=DEFAULT_FIELDS_MT):
    """BendSamples for (e, l, cs) designs over a field grid, spec ids d1, d2, ..."""
    samples = []
    for k, (e, l, cs) in enumerate(designs, start=1):
        for f in fields_mT:
            mt = f * 1e-3
            samples.append(BendSample(mt=mt, e=e, l=l, cs=cs, a_hat=synthetic_a(mt, e, l, cs), spec_id=f"d{k}"))
    return samples


def make_spec(
    lengths_mm=(10.0, 10.0, 10.0),
    moduli_MPa=(20.0, 15.0, 10.0),
    side_mm=1.0,
    residual_flux_mT=20.0,
    name="test-rod",
) -> RodSpec:
    """RodSpec from mm / MPa / mT values."""
    sections = tuple(
        Section(length=length * 1e-3, youngs_modulus=e * 1e6, label=label)
        for length, e, label in zip(lengths_mm, moduli_MPa, ("bottom", "middle", "top"))
    )
    return RodSpec(
        name=name,
        sections=sections,
        cross_section_side=side_mm * 1e-3,
        residual_flux=residual_flux_mT * 1e-3,
    )


def rasterize(y_of_x, x_max_mm, px_per_mm=10.0, half_thickness_px=3, margin_px=20):
    """
    Draw a dark curve y(x) (mm, y up) on a white 8-bit image.

    Each column gets a vertical band of half_thickness_px around the curve,
    so the per-column run is centered on the curve within half a pixel.
    """
    columns = int(np.floor(x_max_mm * px_per_mm)) + 1
    xs = np.arange(columns) / px_per_mm
    ys = np.asarray(y_of_x(xs), dtype=float)
    y_low, y_high = min(0.0, ys.min()), max(0.0, ys.max())

    height = int(np.ceil((y_high - y_low) * px_per_mm)) + 2 * margin_px + 1
    root_row = margin_px + int(np.ceil(y_high * px_per_mm))
    pixels = np.full((height, columns), 255, dtype=np.uint8)
    rows = np.arange(height)
    for c in range(columns):
        center = root_row - ys[c] * px_per_mm
        pixels[np.abs(rows - center) <= half_thickness_px, c] = 0
    return GrayImage(pixels=pixels, scale_mm_per_px=1.0 / px_per_mm)


def rasterize_polyline(points_mm, px_per_mm=10.0, half_thickness_px=3):
    points_mm = np.asarray(points_mm, dtype=float)
    return rasterize(
        lambda x: np.interp(x, points_mm[:, 0], points_mm[:, 1]),
        float(points_mm[-1, 0]),
        px_per_mm,
        half_thickness_px,
    )


@pytest.fixture
def gmc2() -> RodSpec:
    return load_spec("gmc-2")


@pytest.fixture
def uniform_spec() -> RodSpec:
    return make_spec(moduli_MPa=(10.0, 10.0, 10.0), name="uniform")


@pytest.fixture
def parabola_image() -> GrayImage:
    return rasterize(lambda x: 0.02 * x ** 2, 30.0)
