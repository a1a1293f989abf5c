import io

import numpy as np
import pytest
from PIL import Image

from conftest import rasterize_polyline
from magbend.core.exceptions import ArgumentError, ExtractionError
from magbend.services.curve_analysis import CurveSource, curve_from_equilibrium, fit_quadratic
from magbend.services.magnetoelastic_rod import build_rod, solve_equilibrium
from magbend.utils.pgm import GrayImage, decode_pgm, encode_pgm, extract_centerline, read_pgm, write_pgm


def blank(height=60, width=100) -> np.ndarray:
    return np.full((height, width), 255, dtype=np.uint8)


def test_parabola_is_recovered_from_pixels(parabola_image):
    """Test that a rasterized y = 0.02 x^2 (mm) extracts to a within 2%."""
    curve = extract_centerline(parabola_image)
    assert curve.source is CurveSource.IMAGE
    np.testing.assert_array_equal(curve.points[0], [0.0, 0.0])
    assert fit_quadratic(curve).a_per_mm == pytest.approx(0.02, rel=0.02)


def test_horizontal_bar_is_flat():
    pixels = blank()
    pixels[40:50, 5:95] = 0
    curve = extract_centerline(GrayImage(pixels=pixels, scale_mm_per_px=0.1))
    assert len(curve) == 90
    np.testing.assert_allclose(curve.points[:, 1], 0.0)
    assert curve.points[-1, 0] == pytest.approx(89 * 0.1e-3)
    assert fit_quadratic(curve).a == 0.0


def test_vertical_scan_axis(parabola_image):
    """Test that a rod clamped at the bottom of the frame reads the same as one clamped on the left."""
    rotated = GrayImage(pixels=np.rot90(parabola_image.pixels).copy(), scale_mm_per_px=parabola_image.scale_mm_per_px)
    horizontal = fit_quadratic(extract_centerline(parabola_image)).a
    vertical = fit_quadratic(extract_centerline(rotated, axis="y")).a
    assert vertical == pytest.approx(horizontal, rel=1e-9)


def test_solver_curve_survives_rasterization(gmc2):
    """Test that a simulated centerline drawn at 10 px/mm extracts to the same coefficient within 2%."""
    eq = solve_equilibrium(build_rod(gmc2), 0.05)
    direct = fit_quadratic(curve_from_equilibrium(eq)).a
    image = rasterize_polyline(eq.centerline * 1e3, px_per_mm=10.0)
    extracted = fit_quadratic(extract_centerline(image)).a
    assert extracted == pytest.approx(direct, rel=0.02)


def test_blank_image_has_no_centerline():
    with pytest.raises(ExtractionError, match="threshold"):
        extract_centerline(GrayImage(pixels=blank(), scale_mm_per_px=0.1))


def test_two_rods_are_ambiguous():
    """Test that disjoint runs in most columns are reported with the offending columns."""
    pixels = blank()
    pixels[10:15, :] = 0
    pixels[40:45, :] = 0
    with pytest.raises(ExtractionError, match="column"):
        extract_centerline(GrayImage(pixels=pixels, scale_mm_per_px=0.1))


def test_a_few_ambiguous_columns_use_the_longest_run():
    pixels = blank()
    pixels[40:50, :] = 0
    pixels[5:7, 10:15] = 0
    curve = extract_centerline(GrayImage(pixels=pixels, scale_mm_per_px=0.1))
    np.testing.assert_allclose(curve.points[:, 1], 0.0)


@pytest.mark.parametrize("threshold, axis", [(-1, "x"), (256, "x"), (128, "z")])
def test_extraction_arguments(threshold, axis, parabola_image):
    with pytest.raises(ArgumentError):
        extract_centerline(parabola_image, threshold=threshold, axis=axis)


def test_image_requires_positive_scale():
    with pytest.raises(ArgumentError):
        GrayImage(pixels=blank(), scale_mm_per_px=0.0)


# Codec

def test_pgm_round_trip(tmp_path, parabola_image):
    data = encode_pgm(parabola_image)
    assert data.startswith(b"P5")
    decoded = decode_pgm(data, 0.1)
    np.testing.assert_array_equal(decoded.pixels, parabola_image.pixels)

    path = write_pgm(parabola_image, tmp_path / "rod.pgm")
    np.testing.assert_array_equal(read_pgm(path, 0.1).pixels, parabola_image.pixels)


def test_png_is_rejected():
    buffer = io.BytesIO()
    Image.fromarray(blank()).save(buffer, format="PNG")
    with pytest.raises(ExtractionError):
        decode_pgm(buffer.getvalue(), 0.1)


def test_color_ppm_is_rejected():
    buffer = io.BytesIO()
    Image.new("RGB", (8, 8), "white").save(buffer, format="PPM")
    with pytest.raises(ExtractionError):
        decode_pgm(buffer.getvalue(), 0.1)


def test_garbage_is_rejected():
    with pytest.raises(ExtractionError):
        decode_pgm(b"not an image", 0.1)
