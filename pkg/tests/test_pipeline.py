import json
import math

import numpy as np
import pytest

from magbend.core.exceptions import ArgumentError, ConfigurationError
from magbend.models.schemas import LibraryRecord, RodSpecFile, SweepGrid
from magbend.services.pipeline import (
    execute_grid,
    expand_grid,
    format_number,
    library_format,
    load_grid,
    render_svg,
    run_sweep,
    save_library,
    write_library,
)


def record(**overrides) -> LibraryRecord:
    values = dict(
        spec_id="gmc-2", field_mT=50.0, angle_deg=90.0, a_per_mm=0.0123456789123,
        radius_mm=42.0, converged=True, iterations=31,
    )
    values.update(overrides)
    return LibraryRecord(**values)


# Grid

def test_grid_expands_in_spec_field_angle_order():
    grid = SweepGrid(specs=["gmc-2", "gmc-3"], fields_mT=[10.0, 20.0], angles_deg=[90.0, 45.0])
    points = expand_grid(grid)
    assert [p.index for p in points] == list(range(8))
    assert [(p.spec.name, p.field_mT, p.angle_deg) for p in points[:4]] == [
        ("gmc-2", 10.0, 90.0), ("gmc-2", 10.0, 45.0), ("gmc-2", 20.0, 90.0), ("gmc-2", 20.0, 45.0)
    ]


@pytest.mark.parametrize("grid", [
    SweepGrid(specs=[], fields_mT=[10.0]),
    SweepGrid(specs=["gmc-2"], fields_mT=[]),
    SweepGrid(specs=["gmc-2"], fields_mT=[-5.0]),
    SweepGrid(specs=["gmc-2"], fields_mT=[10.0], angles_deg=[]),
    SweepGrid(specs=["no-such-spec"], fields_mT=[10.0]),
])
def test_invalid_grids_fail_before_solving(grid):
    with pytest.raises(ConfigurationError):
        expand_grid(grid)


def test_inline_specs_are_accepted(gmc2):
    grid = SweepGrid(specs=[RodSpecFile.from_spec(gmc2.with_residual_flux(0.03, name="stronger"))], fields_mT=[50.0])
    (rec,) = run_sweep(grid)
    assert rec.spec_id == "stronger"
    assert rec.converged


def test_load_grid(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps({"specs": ["gmc-1"], "fields_mT": [38, 50, 66], "workers": 2}))
    grid = load_grid(path)
    assert grid.fields_mT == [38.0, 50.0, 66.0]
    assert grid.workers == 2
    path.write_text(json.dumps({"specs": ["gmc-1"], "fields_mT": [38], "workers": 0}))
    with pytest.raises(ConfigurationError):
        load_grid(path)


# Sweeps

def test_sweep_emits_one_record_per_point():
    grid = SweepGrid(specs=["gmc-1", "gmc-2", "gmc-3"], fields_mT=[38.0, 50.0, 66.0])
    records = run_sweep(grid)
    assert len(records) == 9
    assert [r.spec_id for r in records[:3]] == ["gmc-1"] * 3
    assert all(r.converged for r in records)
    assert all(r.a_per_mm > 0 and r.iterations > 0 for r in records)


def test_zero_field_record():
    """Test that a 0 mT point gives a zero coefficient and an infinite radius."""
    (rec,) = run_sweep(SweepGrid(specs=["gmc-2"], fields_mT=[0.0]))
    assert rec.a_per_mm == 0.0
    assert math.isinf(rec.radius_mm)
    assert rec.converged
    assert rec.iterations == 0


def test_parallel_sweep_matches_serial():
    """Test that worker threads change neither the order nor the values of the records."""
    serial = SweepGrid(specs=["gmc-2", "gmc-6", "gmc-7"], fields_mT=[20.0, 60.0, 100.0])
    parallel = serial.model_copy(update={"workers": 4})
    assert run_sweep(serial) == run_sweep(parallel)


def test_outcomes_carry_curves():
    outcomes = execute_grid(SweepGrid(specs=["gmc-2"], fields_mT=[50.0]))
    assert outcomes[0].curve.points.shape == (61, 2)
    assert outcomes[0].a == pytest.approx(outcomes[0].record.a_per_mm * 1e3)


# Library files

def test_csv_library_layout():
    data = write_library([record(), record(field_mT=66.0, radius_mm=math.inf, converged=False)])
    text = data.decode("utf-8")
    assert "\r" not in text
    lines = text.split("\n")
    assert lines[0] == "spec_id,field_mT,angle_deg,a_per_mm,radius_mm,converged,iterations"
    assert lines[1] == "gmc-2,50,90,0.0123456789,42,true,31"
    assert lines[2] == "gmc-2,66,90,0.0123456789,inf,false,31"
    assert lines[3] == ""


def test_json_library_uses_null_for_infinite_radius():
    rows = json.loads(write_library([record(radius_mm=math.inf)], "json"))
    assert rows[0]["radius_mm"] is None
    assert rows[0]["a_per_mm"] == pytest.approx(0.0123456789)
    assert rows[0]["converged"] is True


def test_library_bytes_are_deterministic():
    """Test that the same sweep serializes to identical bytes twice."""
    grid = SweepGrid(specs=["gmc-4", "gmc-5"], fields_mT=[38.0, 66.0])
    assert write_library(run_sweep(grid)) == write_library(run_sweep(grid))


def test_library_errors(tmp_path):
    with pytest.raises(ArgumentError):
        write_library([])
    with pytest.raises(ArgumentError):
        write_library([record()], "xml")
    with pytest.raises(ConfigurationError):
        library_format(tmp_path / "library.txt")


def test_save_library_infers_format(tmp_path):
    csv_path = save_library([record()], tmp_path / "out" / "library.csv")
    json_path = save_library([record()], tmp_path / "out" / "library.json")
    assert csv_path.read_text().startswith("spec_id,")
    assert json.loads(json_path.read_text())[0]["spec_id"] == "gmc-2"


@pytest.mark.parametrize("value, text", [(50.0, "50"), (1 / 3, "0.333333333"), (math.inf, "inf"), (math.nan, "nan")])
def test_format_number(value, text):
    assert format_number(value) == text


# Rendering

def test_render_single_curve():
    points = np.column_stack((np.linspace(0, 30, 7), np.linspace(0, 5, 7) ** 2))
    svg = render_svg([("gmc-2 50 mT", points)])
    assert svg.startswith("<?xml")
    assert svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline") == 1
    assert "<title>gmc-2 50 mT</title>" in svg


def test_render_is_deterministic_and_ordered():
    curves = [
        (label, np.column_stack((np.linspace(0, 30, 5), k * np.linspace(0, 3, 5))))
        for k, label in enumerate(["38 mT", "50 mT", "66 mT"], start=1)
    ]
    first, second = render_svg(curves), render_svg(curves)
    assert first == second
    assert first.count("<polyline") == 3
    assert first.index("38 mT") < first.index("50 mT") < first.index("66 mT")


def test_render_skips_empty_curves():
    points = np.column_stack((np.linspace(0, 30, 5), np.zeros(5)))
    svg = render_svg([("empty", np.zeros((0, 2))), ("flat", points)])
    assert svg.count("<polyline") == 1
    assert "<!-- warning: skipped empty curve empty -->" in svg
    with pytest.raises(ArgumentError):
        render_svg([])


def test_render_simulated_family():
    grid = SweepGrid(specs=["gmc-2"], fields_mT=[38.0, 50.0, 66.0])
    curves = [(f"{o.point.field_mT:g} mT", o.curve.points_mm) for o in execute_grid(grid)]
    svg = render_svg(curves)
    assert svg.count("<polyline") == 3
    assert "<title>66 mT</title>" in svg
