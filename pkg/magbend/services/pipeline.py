"""
Parameter sweeps and the bending-prediction library.

A sweep solves one equilibrium per (spec, field, angle) grid point, fits the
quadratic coefficient and bending radius, and emits one LibraryRecord per
point. Points are independent, so they may run on a thread pool; results are
always re-ordered by grid index before they leave this module.
"""

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from magbend.core.exceptions import ArgumentError, ConfigurationError, StorageError
from magbend.models.schemas import BendSample, LibraryRecord, RodSpec, RodSpecFile, SweepGrid
from magbend.services.curve_analysis import Curve2D, bending_radius, curve_from_equilibrium, fit_quadratic
from magbend.services.magnetoelastic_rod import build_rod, load_spec, parse_spec, solve_equilibrium
from magbend.utils.svg import SVG, nice_ticks

logger = logging.getLogger(__name__)

LIBRARY_COLUMNS = ("spec_id", "field_mT", "angle_deg", "a_per_mm", "radius_mm", "converged", "iterations")
SIGNIFICANT_DIGITS = 9


@dataclass(frozen=True)
class GridPoint:
    index: int
    spec: RodSpec
    field_mT: float
    angle_deg: float


@dataclass(frozen=True)
class PointOutcome:
    point: GridPoint
    record: LibraryRecord
    curve: Curve2D
    a: float  # 1/m, nan when the fit failed


def resolve_specs(specs: Sequence[Union[str, RodSpecFile]]) -> List[RodSpec]:
    resolved = []
    for entry in specs:
        if isinstance(entry, RodSpecFile):
            resolved.append(parse_spec(entry))
        else:
            resolved.append(load_spec(entry))
    return resolved


def expand_grid(grid: SweepGrid) -> List[GridPoint]:
    """All grid points in spec, field, angle order. Fails before any solving starts."""
    if not grid.specs:
        raise ConfigurationError("Sweep grid has no specs")
    if not grid.fields_mT:
        raise ConfigurationError("Sweep grid has no field strengths")
    if not grid.angles_deg:
        raise ConfigurationError("Sweep grid has no field angles")
    if any(not math.isfinite(f) or f < 0 for f in grid.fields_mT):
        raise ConfigurationError(f"Field strengths must be finite and non-negative: {grid.fields_mT}")

    specs = resolve_specs(grid.specs)
    return [
        GridPoint(index=i, spec=spec, field_mT=field_mT, angle_deg=angle_deg)
        for i, (spec, field_mT, angle_deg) in enumerate(product(specs, grid.fields_mT, grid.angles_deg))
    ]


def solve_point(point: GridPoint, grid: SweepGrid) -> PointOutcome:
    rod = build_rod(point.spec, grid.resolution)
    equilibrium = solve_equilibrium(rod, point.field_mT * 1e-3, math.radians(point.angle_deg), grid.solver)
    curve = curve_from_equilibrium(equilibrium)
    converged = equilibrium.converged

    try:
        a = fit_quadratic(curve).a
    except ArgumentError as e:
        logger.warning(f"Quadratic fit failed for {point.spec.name} at {point.field_mT} mT: {e}")
        a = math.nan
        converged = False

    record = LibraryRecord(
        spec_id=point.spec.name,
        field_mT=point.field_mT,
        angle_deg=point.angle_deg,
        a_per_mm=a * 1e-3,
        radius_mm=bending_radius(curve) * 1e3,
        converged=converged,
        iterations=equilibrium.iterations,
    )
    return PointOutcome(point=point, record=record, curve=curve, a=a)


def execute_grid(grid: SweepGrid) -> List[PointOutcome]:
    points = expand_grid(grid)
    start_time = time.time()

    if grid.workers > 1:
        with ThreadPoolExecutor(max_workers=grid.workers) as pool:
            outcomes = list(pool.map(lambda p: solve_point(p, grid), points))
    else:
        outcomes = [solve_point(p, grid) for p in points]
    outcomes.sort(key=lambda o: o.point.index)

    failures = sum(not o.record.converged for o in outcomes)
    duration = time.time() - start_time
    logger.info(
        f"Sweep finished: {len(outcomes)} points, {failures} not converged, "
        f"{grid.workers} worker(s), {duration:.2f}s"
    )
    return outcomes


def run_sweep(grid: SweepGrid) -> List[LibraryRecord]:
    """One LibraryRecord per grid point; non-converged points are flagged, never dropped."""
    return [o.record for o in execute_grid(grid)]


def samples_from_outcomes(outcomes: Sequence[PointOutcome]) -> Tuple[List[BendSample], List[LibraryRecord]]:
    """Surrogate samples from converged points, plus the records that were excluded."""
    samples, excluded = [], []
    for outcome in outcomes:
        if not outcome.record.converged or not math.isfinite(outcome.a):
            excluded.append(outcome.record)
            continue
        spec = outcome.point.spec
        samples.append(
            BendSample(
                mt=outcome.point.field_mT * 1e-3,
                e=spec.moduli,
                l=spec.lengths,
                cs=spec.cross_section_side,
                a_hat=outcome.a,
                spec_id=spec.name,
            )
        )
    return samples, excluded


def format_number(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def _json_number(value: float) -> Optional[float]:
    if not math.isfinite(value):
        return None
    return float(format_number(value))


def write_library(records: Sequence[LibraryRecord], fmt: str = "csv") -> bytes:
    """
    Serialize records with a fixed column order, 9 significant digits and LF endings.

    Non-finite radii are written as inf in CSV and null in JSON.
    """
    if not records:
        raise ArgumentError("Cannot write an empty library")

    if fmt == "csv":
        lines = [",".join(LIBRARY_COLUMNS)]
        for r in records:
            lines.append(",".join([
                r.spec_id,
                format_number(r.field_mT),
                format_number(r.angle_deg),
                format_number(r.a_per_mm),
                format_number(r.radius_mm),
                "true" if r.converged else "false",
                str(r.iterations),
            ]))
        return ("\n".join(lines) + "\n").encode("utf-8")

    if fmt == "json":
        rows = [
            {
                "spec_id": r.spec_id,
                "field_mT": _json_number(r.field_mT),
                "angle_deg": _json_number(r.angle_deg),
                "a_per_mm": _json_number(r.a_per_mm),
                "radius_mm": _json_number(r.radius_mm),
                "converged": r.converged,
                "iterations": r.iterations,
            }
            for r in records
        ]
        return (json.dumps(rows, indent=2) + "\n").encode("utf-8")

    raise ArgumentError(f"Unknown library format {fmt!r}; expected csv or json")


def library_format(path: Union[str, Path]) -> str:
    suffix = Path(path).suffix.lower()
    if suffix not in (".csv", ".json"):
        raise ConfigurationError(f"Cannot infer library format from {path}; use .csv or .json")
    return suffix[1:]


def write_bytes(path: Union[str, Path], payload: bytes) -> Path:
    """Write a file, creating parent directories; OSError becomes StorageError."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as e:
        raise StorageError(path, str(e)) from e
    logger.debug(f"Wrote {len(payload)} bytes to {path}")
    return path


def save_library(records: Sequence[LibraryRecord], path: Union[str, Path]) -> Path:
    return write_bytes(path, write_library(records, library_format(path)))


def load_grid(path: Union[str, Path]) -> SweepGrid:
    """Read a sweep grid from JSON."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(path, str(e)) from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid sweep grid {path}: {e}") from e
    try:
        return SweepGrid.model_validate(payload)
    except ValueError as e:
        raise ConfigurationError(f"Invalid sweep grid {path}: {e}") from e


@dataclass(frozen=True)
class RenderStyle:
    width: int = 640
    height: int = 480
    margin: int = 60
    stroke_width: float = 1.5
    palette: Tuple[str, ...] = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")
    title: str = ""


def render_svg(curves: Sequence[Tuple[str, np.ndarray]], style: Optional[RenderStyle] = None) -> str:
    """
    Plot labeled centerlines (points in mm) on a shared millimeter grid.

    Curves are drawn in the given order. Empty curves are skipped and listed
    in an SVG comment.
    """
    style = style or RenderStyle()
    if not curves:
        raise ArgumentError("render_svg needs at least one curve")

    drawable, skipped = [], []
    for label, points in curves:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(points) == 0:
            logger.warning(f"Skipping empty curve {label!r}")
            skipped.append(label)
        else:
            drawable.append((label, points))

    svg = SVG()
    svg.header(style.width, style.height)
    for label in skipped:
        svg.comment(f"warning: skipped empty curve {label}")
    svg.rectangle(0, 0, style.width, style.height, "white")

    if drawable:
        stacked = np.vstack([p for _, p in drawable] + [np.zeros((1, 2))])
        x_ticks = nice_ticks(float(stacked[:, 0].min()), float(stacked[:, 0].max()))
        y_ticks = nice_ticks(float(stacked[:, 1].min()), float(stacked[:, 1].max()))
    else:
        x_ticks = y_ticks = nice_ticks(0.0, 1.0)

    left, top = style.margin, style.margin
    plot_w, plot_h = style.width - 2 * style.margin, style.height - 2 * style.margin
    x0, x1, y0, y1 = x_ticks[0], x_ticks[-1], y_ticks[0], y_ticks[-1]

    def to_px(x: float, y: float) -> Tuple[float, float]:
        return left + (x - x0) / (x1 - x0) * plot_w, top + (y1 - y) / (y1 - y0) * plot_h

    font = 'font-family="sans-serif" font-size="11"'
    for tx in x_ticks:
        px, _ = to_px(tx, y0)
        svg.line(px, top, px, top + plot_h, "#dddddd")
        svg.text(px, top + plot_h + 16, f"{tx:g}", f'{font} text-anchor="middle"')
    for ty in y_ticks:
        _, py = to_px(x0, ty)
        svg.line(left, py, left + plot_w, py, "#dddddd")
        svg.text(left - 6, py + 4, f"{ty:g}", f'{font} text-anchor="end"')
    svg.line(left, top + plot_h, left + plot_w, top + plot_h, "black")
    svg.line(left, top, left, top + plot_h, "black")
    svg.text(left + plot_w / 2, style.height - 12, "x (mm)", f'{font} text-anchor="middle"')
    svg.text(14, top + plot_h / 2, "y (mm)", f'{font} text-anchor="middle" transform="rotate(-90 14 {top + plot_h / 2:.2f})"')
    if style.title:
        svg.text(style.width / 2, top / 2, style.title, 'font-family="sans-serif" font-size="14" text-anchor="middle"')

    for k, (label, points) in enumerate(drawable):
        color = style.palette[k % len(style.palette)]
        svg.polyline((to_px(x, y) for x, y in points), color, style.stroke_width, label)
        legend_y = top + 14 + 16 * k
        svg.line(left + plot_w - 120, legend_y, left + plot_w - 100, legend_y, color, 2.0)
        svg.text(left + plot_w - 94, legend_y + 4, label, font)

    return svg.get_svg()


def save_svg(document: str, path: Union[str, Path]) -> Path:
    return write_bytes(path, document.encode("utf-8"))


def summarize_equilibrium(spec: RodSpec, equilibrium) -> dict:
    """JSON-ready solve result in mm / J, shared by the CLI and the HTTP API."""
    curve = curve_from_equilibrium(equilibrium)
    try:
        a_per_mm = fit_quadratic(curve).a_per_mm
    except ArgumentError as e:
        logger.warning(f"Quadratic fit failed for {spec.name}: {e}")
        a_per_mm = None
    radius = bending_radius(curve)
    return {
        "name": spec.name,
        "converged": equilibrium.converged,
        "gradient_norm": equilibrium.gradient_norm,
        "iterations": equilibrium.iterations,
        "continuation_steps_used": equilibrium.continuation_steps_used,
        "segment_length_mm": equilibrium.segment_length * 1e3,
        "angles": equilibrium.joint_angles.tolist(),
        "centerline_mm": (equilibrium.centerline * 1e3).tolist(),
        "bending_energy_J": equilibrium.bending_energy,
        "zeeman_energy_J": equilibrium.zeeman_energy,
        "a_per_mm": a_per_mm,
        "radius_mm": None if math.isinf(radius) else radius * 1e3,
    }
