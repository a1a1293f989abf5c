"""
Command-line interface: `magbend <subcommand> [flags]`.

Exit codes: 0 success, 2 configuration or argument error, 3 a solve did not
converge, 4 I/O error.
"""

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from magbend import __version__
from magbend.core.config import settings
from magbend.core.exceptions import (
    EXIT_CONFIGURATION,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    ArgumentError,
    MagbendError,
)
from magbend.core.logs import print_error, print_info, print_success, print_warning, setup_logging
from magbend.models.schemas import CuboidMagnet, SolverOptions, SweepGrid, TrainOptions
from magbend.services import curve_analysis, pipeline, surrogate
from magbend.services.epm_field import axial_profile, calibrate_remanence, field_at_pole_distance
from magbend.services.magnetoelastic_rod import build_rod, load_spec, solve_equilibrium
from magbend.utils.pgm import extract_centerline, read_pgm

logger = logging.getLogger(__name__)


def parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def parse_triple(text: str) -> List[float]:
    values = parse_floats(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return values


def parse_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def solver_options() -> SolverOptions:
    return SolverOptions(
        continuation_steps=settings.MAGBEND_CONTINUATION_STEPS,
        tol=settings.MAGBEND_SOLVER_TOL,
        max_iters=settings.MAGBEND_SOLVER_MAX_ITERS,
    )


def default_output(name: str) -> Path:
    return Path(settings.MAGBEND_OUTPUT_DIR) / name


def emit(args, payload: dict, lines: Sequence[str] = ()) -> None:
    """Print the result as JSON with --json, otherwise as colored status lines."""
    if args.json:
        print(json.dumps(payload, indent=2))
        return
    for line in lines:
        print_info(line)


# Subcommands

def cmd_field(args) -> int:
    magnet = CuboidMagnet.cube(args.side_mm * 1e-3)
    if args.calibrate:
        if args.measured_mT is None:
            raise ArgumentError("--calibrate needs --measured-mT")
        br = calibrate_remanence(magnet, args.distance_mm * 1e-3, args.measured_mT * 1e-3, args.order)
    elif args.br_T is not None:
        br = args.br_T
    else:
        raise ArgumentError("Provide --br-T or --calibrate --measured-mT")

    magnet = magnet.model_copy(update={"br": br})
    value = field_at_pole_distance(magnet, args.distance_mm * 1e-3, args.order)
    payload = {"h_A_per_m": value.h, "b_mT": value.b_mT}
    if args.calibrate:
        payload["br_T"] = br
    lines = [f"B = {value.b_mT:.4f} mT, H = {value.h:.1f} A/m at {args.distance_mm:g} mm (Br = {br:.4f} T)"]

    if args.profile:
        profile = axial_profile(magnet, [d * 1e-3 for d in args.profile], args.order)
        payload["profile"] = [{"distance_mm": d, "b_mT": v.b_mT} for d, v in zip(args.profile, profile)]
        lines += [f"{d:8.2f} mm  {v.b_mT:10.4f} mT" for d, v in zip(args.profile, profile)]

    emit(args, payload, lines)
    return EXIT_OK


def _centerline_csv(centerline_mm: np.ndarray) -> bytes:
    rows = ["x_mm,y_mm"] + [f"{pipeline.format_number(x)},{pipeline.format_number(y)}" for x, y in centerline_mm]
    return ("\n".join(rows) + "\n").encode("utf-8")


def cmd_solve(args) -> int:
    spec = load_spec(args.spec)
    rod = build_rod(spec, args.resolution)
    start_time = time.time()
    equilibrium = solve_equilibrium(rod, args.field_mT * 1e-3, math.radians(args.angle_deg), solver_options())
    duration = time.time() - start_time
    summary = pipeline.summarize_equilibrium(spec, equilibrium)

    if args.out:
        out = Path(args.out)
        if out.suffix.lower() == ".csv":
            pipeline.write_bytes(out, _centerline_csv(equilibrium.centerline * 1e3))
        else:
            pipeline.write_bytes(out, (json.dumps(summary, indent=2) + "\n").encode("utf-8"))
        logger.info(f"Wrote solution to {out}")

    emit(args, summary, [
        f"{spec.name}: {rod.n_segments} segments, {args.field_mT:g} mT at {args.angle_deg:g} deg, {duration:.2f}s",
        f"a = {summary['a_per_mm']} 1/mm, radius = {summary['radius_mm']} mm",
        f"tip = ({equilibrium.tip[0] * 1e3:.3f}, {equilibrium.tip[1] * 1e3:.3f}) mm",
    ])
    if not equilibrium.converged:
        print_warning(f"Solve did not converge (|g| = {equilibrium.gradient_norm:.3e} N*m)")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_fit(args) -> int:
    curve = curve_analysis.read_points_csv(args.input)
    result = curve_analysis.describe(curve, args.metric)
    lines = [f"{k}: {v}" for k, v in result.items() if k != "curvature_per_mm"]
    if "curvature_per_mm" in result:
        lines.append("curvature (1/mm): " + ", ".join(f"{v:.6g}" for v in result["curvature_per_mm"]))
    emit(args, result, lines)
    return EXIT_OK


def _grid_from_args(args) -> SweepGrid:
    if args.grid:
        grid = pipeline.load_grid(args.grid)
        updates = {}
        if args.workers is not None:
            updates["workers"] = args.workers
        return grid.model_copy(update=updates) if updates else grid
    if not args.specs or args.fields_mT is None:
        raise ArgumentError("Provide --grid or both --specs and --fields-mT")
    return SweepGrid(
        specs=args.specs,
        fields_mT=args.fields_mT,
        angles_deg=args.angles_deg or [settings.MAGBEND_FIELD_ANGLE_DEG],
        resolution=args.resolution,
        solver=solver_options(),
        workers=args.workers or settings.MAGBEND_SWEEP_WORKERS,
    )


def cmd_sweep(args) -> int:
    grid = _grid_from_args(args)
    outcomes = pipeline.execute_grid(grid)
    records = [o.record for o in outcomes]
    out = Path(args.out) if args.out else default_output("library.csv")
    pipeline.save_library(records, out)

    if args.dataset_out:
        samples, excluded = pipeline.samples_from_outcomes(outcomes)
        surrogate.save_dataset_csv(samples, args.dataset_out)
        logger.info(f"Wrote {len(samples)} samples to {args.dataset_out} ({len(excluded)} excluded)")

    failures = [r for r in records if not r.converged]
    emit(args, {"records": len(records), "not_converged": len(failures), "library": str(out)},
         [f"{len(records)} records written to {out}"])
    if failures:
        print_warning(f"{len(failures)} grid point(s) did not converge")
        return EXIT_NOT_CONVERGED
    print_success("Sweep complete")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.dataset:
        samples = surrogate.read_dataset_csv(args.dataset)
    else:
        specs = [load_spec(i) for i in args.specs]
        dataset = surrogate.build_dataset(specs, surrogate.DEFAULT_FIELDS_MT, solver_options(),
                                          settings.MAGBEND_RESOLUTION, settings.MAGBEND_FIELD_ANGLE_DEG,
                                          settings.MAGBEND_SWEEP_WORKERS)
        samples = dataset.samples

    train_set, test_set = surrogate.split_holdout(samples, args.holdout_mT * 1e-3)
    model = surrogate.SurrogateModel.initialize(seed=args.seed)
    report = surrogate.train(model, train_set, TrainOptions(lr=args.lr, epochs=args.epochs), test_set)
    out = Path(args.out) if args.out else Path(settings.MAGBEND_MODEL_PATH)
    surrogate.save_model(model, out)

    payload = {
        "model": str(out),
        "train_samples": len(train_set),
        "test_samples": len(test_set),
        "final_train_mse": report.final_train_mse,
        "test_mse": report.test_mse,
        "initial_loss": report.loss_history[0],
        "final_loss": report.final_loss,
        "best_epoch": report.best_epoch,
    }
    emit(args, payload, [
        f"{len(train_set)} train / {len(test_set)} test samples, {report.epochs} epochs",
        f"train MSE {report.final_train_mse:.3e}, test MSE {report.test_mse:.3e} (normalized units)",
        f"model written to {out}",
    ])
    return EXIT_OK


def cmd_predict(args) -> int:
    model = surrogate.load_model(args.model or settings.MAGBEND_MODEL_PATH)
    if args.spec:
        specs = [load_spec(s) for s in args.spec]
        records = surrogate.predict_library(model, specs, args.fields_mT or surrogate.DEFAULT_FIELDS_MT)
        emit(args, {"predictions": [r.model_dump() for r in records]},
             [f"{r.spec_id:>10}  {r.field_mT:7.2f} mT  a = {r.a_per_mm:.6g} 1/mm" for r in records])
        return EXIT_OK

    missing = [name for name in ("mt_mT", "e_MPa", "l_mm", "cs_mm") if getattr(args, name) is None]
    if missing:
        raise ArgumentError(f"Missing inputs: {', '.join('--' + m.replace('_', '-') for m in missing)}")
    a = surrogate.forward(
        model,
        args.mt_mT * 1e-3,
        [v * 1e6 for v in args.e_MPa],
        [v * 1e-3 for v in args.l_mm],
        args.cs_mm * 1e-3,
    )
    emit(args, {"a_per_mm": a * 1e-3}, [f"a = {a * 1e-3:.6g} 1/mm"])
    return EXIT_OK


def cmd_extract(args) -> int:
    image = read_pgm(args.input, args.scale_mm_per_px)
    curve = extract_centerline(image, args.threshold, args.axis)
    fit = curve_analysis.fit_quadratic(curve)
    if args.out:
        pipeline.write_bytes(args.out, _centerline_csv(curve.points_mm))
    emit(args, {"points_mm": curve.points_mm.tolist(), "a_per_mm": fit.a_per_mm, "n_points": fit.n_points},
         [f"{fit.n_points} centerline points, a = {fit.a_per_mm:.6g} 1/mm"])
    return EXIT_OK


def cmd_render(args) -> int:
    curves = []
    if args.input:
        labels = args.labels or [Path(p).stem for p in args.input]
        if len(labels) != len(args.input):
            raise ArgumentError("--labels must name every --in file")
        for label, path in zip(labels, args.input):
            curves.append((label, curve_analysis.read_points_csv(path).points_mm))
    elif args.spec and args.fields_mT:
        spec = load_spec(args.spec)
        rod = build_rod(spec, args.resolution)
        for field_mT in args.fields_mT:
            eq = solve_equilibrium(rod, field_mT * 1e-3, math.radians(args.angle_deg), solver_options())
            if not eq.converged:
                print_warning(f"{spec.name} at {field_mT:g} mT did not converge")
            curves.append((f"{spec.name} {field_mT:g} mT", eq.centerline * 1e3))
    else:
        raise ArgumentError("Provide --in files or --spec with --fields-mT")

    out = Path(args.out) if args.out else default_output("curves.svg")
    pipeline.save_svg(pipeline.render_svg(curves, pipeline.RenderStyle(title=args.title or "")), out)
    emit(args, {"svg": str(out), "curves": len(curves)}, [f"Wrote {len(curves)} curve(s) to {out}"])
    return EXIT_OK


def cmd_serve(args) -> int:
    from magbend.main import serve

    serve(host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="Only log warnings and errors")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="Print results as JSON")

    parser = argparse.ArgumentParser(prog="magbend", description="Graded-stiffness magnetic continuum toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    parser.add_argument("--json", action="store_true", help="Print results as JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", parents=[common], help="Axial field of the cubic magnet")
    p.add_argument("--side-mm", type=float, default=settings.MAGBEND_MAGNET_SIDE_MM)
    p.add_argument("--br-T", type=float)
    p.add_argument("--calibrate", action="store_true", help="Back-calculate Br from --measured-mT")
    p.add_argument("--measured-mT", type=float)
    p.add_argument("--distance-mm", type=float, required=True, help="Distance from the N pole face")
    p.add_argument("--order", type=int, default=settings.MAGBEND_QUADRATURE_ORDER)
    p.add_argument("--profile", type=parse_floats, help="Extra distances (mm) to tabulate")
    p.set_defaults(handler=cmd_field)

    p = sub.add_parser("solve", parents=[common], help="Solve one bending equilibrium")
    p.add_argument("--spec", required=True, help="Spec JSON path or bundled id (gmc-1 ... gmc-7)")
    p.add_argument("--field-mT", type=float, required=True)
    p.add_argument("--angle-deg", type=float, default=settings.MAGBEND_FIELD_ANGLE_DEG)
    p.add_argument("--resolution", type=float, default=settings.MAGBEND_RESOLUTION, help="Segments per mm")
    p.add_argument("--out", help="Write .json summary or .csv centerline")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("fit", parents=[common], help="Fit a centerline CSV (x,y in mm)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--metric", choices=["quad", "radius", "curvature"], default="quad")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("sweep", parents=[common], help="Parameter sweep to a prediction library")
    p.add_argument("--grid", help="Sweep grid JSON")
    p.add_argument("--specs", type=parse_list)
    p.add_argument("--fields-mT", type=parse_floats)
    p.add_argument("--angles-deg", type=parse_floats)
    p.add_argument("--resolution", type=float, default=settings.MAGBEND_RESOLUTION)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="Library path (.csv or .json)")
    p.add_argument("--dataset-out", help="Also write the surrogate dataset CSV")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("train", parents=[common], help="Train the surrogate")
    p.add_argument("--dataset", help="Dataset CSV; generated from --specs when omitted")
    p.add_argument("--specs", type=parse_list, default=[f"gmc-{i}" for i in range(1, 8)])
    p.add_argument("--holdout-mT", type=float, default=settings.MAGBEND_HOLDOUT_MT)
    p.add_argument("--epochs", type=int, default=settings.MAGBEND_SURROGATE_EPOCHS)
    p.add_argument("--seed", type=int, default=settings.MAGBEND_SURROGATE_SEED)
    p.add_argument("--lr", type=float, default=settings.MAGBEND_SURROGATE_LR)
    p.add_argument("--out", help="Model JSON path")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="Predict with a trained surrogate")
    p.add_argument("--model")
    p.add_argument("--mt-mT", type=float)
    p.add_argument("--e-MPa", type=parse_triple)
    p.add_argument("--l-mm", type=parse_triple)
    p.add_argument("--cs-mm", type=float)
    p.add_argument("--spec", type=parse_list, help="Predict a library for these specs instead")
    p.add_argument("--fields-mT", type=parse_floats)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("extract", parents=[common], help="Extract a centerline from a PGM image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--scale-mm-per-px", type=float, required=True)
    p.add_argument("--threshold", type=int, default=settings.MAGBEND_EXTRACT_THRESHOLD)
    p.add_argument("--axis", choices=["x", "y"], default="x")
    p.add_argument("--out", help="Write the centerline as CSV (mm)")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("render", parents=[common], help="Plot centerlines to SVG")
    p.add_argument("--in", dest="input", type=parse_list)
    p.add_argument("--labels", type=parse_list)
    p.add_argument("--spec")
    p.add_argument("--fields-mT", type=parse_floats)
    p.add_argument("--angle-deg", type=float, default=settings.MAGBEND_FIELD_ANGLE_DEG)
    p.add_argument("--resolution", type=float, default=settings.MAGBEND_RESOLUTION)
    p.add_argument("--title")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_render)

    p = sub.add_parser("serve", parents=[common], help="Run the HTTP API")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(quiet=args.quiet)
    try:
        return args.handler(args)
    except MagbendError as e:
        print_error(str(e))
        return e.exit_code
    except ValidationError as e:
        print_error(f"Invalid input: {e}")
        return EXIT_CONFIGURATION


if __name__ == "__main__":
    sys.exit(main())
