"""
8-bit grayscale PGM (P5) images and centerline extraction.

The continuum is dark on a light background. Binarization marks pixels below
the threshold; each scan line across the rod contributes the mean index of
its continuum run as one centerline point.
"""

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from magbend.core.exceptions import ArgumentError, ExtractionError, StorageError
from magbend.services.curve_analysis import Curve2D, CurveSource

logger = logging.getLogger(__name__)

AMBIGUOUS_FRACTION = 0.2


@dataclass(frozen=True)
class GrayImage:
    pixels: np.ndarray  # (height, width) uint8, row 0 at the top
    scale_mm_per_px: float

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ArgumentError(f"Image must be a non-empty 2D array, got shape {pixels.shape}")
        if not self.scale_mm_per_px > 0:
            raise ArgumentError(f"Scale must be positive, got {self.scale_mm_per_px}")
        object.__setattr__(self, "pixels", pixels.astype(np.uint8, copy=False))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def decode_pgm(data: bytes, scale_mm_per_px: float) -> GrayImage:
    """Decode PGM bytes. Anything other than 8-bit grayscale PGM is rejected."""
    try:
        with Image.open(io.BytesIO(data)) as image:
            if image.format != "PPM" or image.mode != "L":
                raise ExtractionError(
                    f"Expected an 8-bit grayscale PGM, got format {image.format} mode {image.mode}"
                )
            pixels = np.array(image, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as e:
        raise ExtractionError(f"Not a readable PGM image: {e}") from e
    return GrayImage(pixels=pixels, scale_mm_per_px=scale_mm_per_px)


def read_pgm(path: Union[str, Path], scale_mm_per_px: float) -> GrayImage:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise StorageError(path, str(e)) from e
    image = decode_pgm(data, scale_mm_per_px)
    logger.debug(f"Read {image.width}x{image.height} PGM from {path}")
    return image


def encode_pgm(image: GrayImage) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(image.pixels).save(buffer, format="PPM")
    return buffer.getvalue()


def write_pgm(image: GrayImage, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.write_bytes(encode_pgm(image))
    except OSError as e:
        raise StorageError(path, str(e)) from e
    return path


def _runs(line: np.ndarray) -> List[Tuple[int, int]]:
    """Half-open [start, end) index ranges of consecutive True values."""
    edges = np.diff(np.concatenate(([0], line.astype(np.int8), [0])))
    return list(zip(np.flatnonzero(edges == 1).tolist(), np.flatnonzero(edges == -1).tolist()))


def extract_centerline(image: GrayImage, threshold: int = 128, axis: str = "x") -> Curve2D:
    """
    Centerline of the dark continuum, root-aligned, in meters.

    axis="x" scans columns left to right (rod clamped on the left);
    axis="y" scans rows bottom to top (rod clamped at the bottom). The image
    y axis points up. Columns with several runs use the longest run unless
    more than 20% of the occupied scan lines are ambiguous.

    Raises:
        ExtractionError: No continuum pixels, or too many ambiguous scan lines
    """
    if not 0 <= threshold <= 255:
        raise ArgumentError(f"Threshold must be within 0-255, got {threshold}")
    if axis not in ("x", "y"):
        raise ArgumentError(f"Axis must be 'x' or 'y', got {axis!r}")

    mask = image.pixels < threshold
    if axis == "x":
        lanes = mask.T
        lane_name, lane_label = "column", lambda k: k
    else:
        lanes = mask[::-1]
        lane_name, lane_label = "row", lambda k: image.height - 1 - k

    along, across, ambiguous = [], [], []
    for k, lane in enumerate(lanes):
        runs = _runs(lane)
        if not runs:
            continue
        if len(runs) > 1:
            ambiguous.append(lane_label(k))
        start, end = max(runs, key=lambda r: r[1] - r[0])
        along.append(k)
        across.append(0.5 * (start + end - 1))

    if not along:
        raise ExtractionError(f"No pixels below threshold {threshold}; nothing to extract")
    if len(ambiguous) > AMBIGUOUS_FRACTION * len(along):
        raise ExtractionError(
            f"Ambiguous centerline: {len(ambiguous)} of {len(along)} {lane_name}s contain several "
            f"disjoint runs ({lane_name}s {ambiguous})"
        )
    if ambiguous:
        logger.warning(f"Using the longest run in {len(ambiguous)} ambiguous {lane_name}(s)")

    scale_m = image.scale_mm_per_px * 1e-3
    # rows grow downward and columns to the right; both map to -lateral
    points = np.column_stack((np.array(along, dtype=float), -np.array(across))) * scale_m
    points -= points[0]
    try:
        return Curve2D(points=points, source=CurveSource.IMAGE, base_angle=0.0)
    except ArgumentError as e:
        raise ExtractionError(f"Extracted centerline is unusable: {e}") from e
