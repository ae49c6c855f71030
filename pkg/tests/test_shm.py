import math

import numpy as np
import pandas as pd
import pytest
from shapely.geometry import Point as ShapelyPoint

from stealth_print.data import triangle_gcode
from stealth_print.errors import BoundaryEscapeError, ConfigError, FileFormatError, ToolpathError
from stealth_print.gcode import (
    Comment,
    GCodeProgram,
    Move,
    Point3,
    Segment,
    emit_gcode,
    parse_gcode,
    print_time,
    to_toolpath,
)
from stealth_print.geometry import Polygon, Rect
from stealth_print.shm import (
    PolyBoundary,
    RectBoundary,
    ShmConfig,
    added_path_length,
    apply_shm,
    extension_point,
    load_boundaries,
    naive_boundaries,
    overhead_report,
    save_boundaries,
)

SQUARE = RectBoundary(Rect((0.0, 0.0), (10.0, 10.0)))


def _segment(x0, y0, x1, y1) -> Segment:
    return Segment(Point3(x0, y0, 0.2), Point3(x1, y1, 0.2), 1200.0, extruding=True)


def _bisect_exit(rect: Rect, end, direction) -> tuple[float, float]:
    """Farthest point along the ray that the rectangle still covers, by bisection."""
    low, high = 0.0, 2.0 * math.hypot(rect.width, rect.height)
    for _ in range(200):
        mid = (low + high) / 2.0
        point = (end[0] + mid * direction[0], end[1] + mid * direction[1])
        if rect.covers(point, 0.0):
            low = mid
        else:
            high = mid
    return end[0] + low * direction[0], end[1] + low * direction[1]


def _x_reversals(segments) -> list[tuple[float, float]]:
    points, last = [], 0.0
    for segment in segments:
        dx = segment.end.x - segment.start.x
        if abs(dx) < 1e-12:
            continue
        if last and math.copysign(1.0, dx) != last:
            points.append((segment.start.x, segment.start.y))
        last = math.copysign(1.0, dx)
    return points


def test_extension_point_along_axis():
    assert extension_point(_segment(0, 0, 1, 0), SQUARE) == pytest.approx((10.0, 0.0))


def test_extension_point_on_boundary_is_none():
    assert extension_point(_segment(5, 5, 10, 5), SQUARE) is None


def test_extension_point_diagonal():
    assert extension_point(_segment(0, 0, 3, 4), SQUARE) == pytest.approx((7.5, 10.0))
    short = RectBoundary(Rect((0.0, 0.0), (10.0, 8.0)))
    assert extension_point(_segment(0, 0, 3, 4), short) == pytest.approx((6.0, 8.0))


def test_extension_point_matches_bisection_oracle(rng):
    rect = Rect((-3.0, 2.0), (17.0, 11.0))
    boundary = RectBoundary(rect)
    for _ in range(200):
        end = (rng.uniform(-3.0, 17.0), rng.uniform(2.0, 11.0))
        angle = rng.uniform(0.0, 2.0 * math.pi)
        length = rng.uniform(0.5, 3.0)
        start = (end[0] - length * math.cos(angle), end[1] - length * math.sin(angle))
        point = extension_point(_segment(*start, *end), boundary, min_extension=0.0)
        expected = _bisect_exit(rect, end, (math.cos(angle), math.sin(angle)))
        if math.dist(end, expected) <= 1e-9:
            assert point is None
        else:
            assert point == pytest.approx(expected, abs=1e-6)


def test_extension_point_min_extension():
    assert extension_point(_segment(0, 0, 9.5, 0), SQUARE, min_extension=1.0) is None
    assert extension_point(_segment(0, 0, 9.5, 0), SQUARE, min_extension=0.1) == pytest.approx((10.0, 0.0))


def test_extension_point_without_xy_motion():
    assert extension_point(_segment(3, 3, 3, 3), SQUARE) is None


def test_extension_point_in_polygon_stops_at_first_edge():
    ell = PolyBoundary(
        Polygon(((0.0, 0.0), (10.0, 0.0), (10.0, 4.0), (4.0, 4.0), (4.0, 10.0), (0.0, 10.0)))
    )
    assert extension_point(_segment(1, 2, 2, 2), ell) == pytest.approx((10.0, 2.0))
    assert extension_point(_segment(1, 6, 2, 6), ell) == pytest.approx((4.0, 6.0))
    point = extension_point(_segment(2, 1, 2, 2), ell)
    assert point == pytest.approx((2.0, 10.0))
    assert ell.polygon.shape.exterior.distance(ShapelyPoint(point)) < 1e-9


def test_extension_point_escape():
    with pytest.raises(BoundaryEscapeError, match="escapes boundary"):
        extension_point(_segment(5, 5, 12, 5), SQUARE)


def test_naive_boundaries(triangle_toolpath):
    boundaries = naive_boundaries(triangle_toolpath, margin=2.0)
    assert list(boundaries) == [1]
    rect = boundaries[1].rect
    assert rect.min == pytest.approx((18.0, 18.0))
    assert rect.max == pytest.approx((119.5, 60.0))


def test_apply_shm_extends_every_row_to_the_rectangle(triangle_program, triangle_toolpath):
    boundary = naive_boundaries(triangle_toolpath, margin=2.0)
    result = apply_shm(triangle_program, boundary)
    rect = boundary[1].rect
    assert len(result.extensions) == 20
    assert result.warnings == []
    for extension in result.extensions:
        assert extension.point[0] in (pytest.approx(rect.min[0]), pytest.approx(rect.max[0]))
        assert extension.point[1] == pytest.approx(extension.endpoint[1])


def test_apply_shm_preserves_deposition(triangle_program, triangle_toolpath):
    result = apply_shm(triangle_program, naive_boundaries(triangle_toolpath))
    obfuscated = to_toolpath(result.program)

    def deposited(toolpath):
        return [(s.start, s.end, s.e_delta) for s in toolpath.extruding()]

    assert deposited(obfuscated) == deposited(triangle_toolpath)
    original_commands = [c for c, n in zip(result.program.commands, result.program.source_line_numbers) if n]
    assert tuple(original_commands) == triangle_program.commands


def test_apply_shm_length_identity(triangle_program, triangle_toolpath):
    result = apply_shm(triangle_program, naive_boundaries(triangle_toolpath))
    obfuscated = to_toolpath(result.program)
    assert obfuscated.length(xy=True) == pytest.approx(
        triangle_toolpath.length(xy=True) + result.added_length, rel=1e-12
    )
    assert added_path_length(triangle_toolpath, obfuscated) == pytest.approx(result.added_length)


def test_apply_shm_containment(triangle_program, triangle_toolpath):
    boundary = naive_boundaries(triangle_toolpath)
    result = apply_shm(triangle_program, boundary)
    obfuscated = to_toolpath(result.program)
    inserted = {i for i, n in enumerate(result.program.source_line_numbers) if n is None}
    checked = [s for s in obfuscated.segments if s.extruding or s.command_index in inserted]
    assert len(checked) == 20 + 2 * 20
    for segment in checked:
        for point in (segment.start, segment.end):
            assert boundary[1].covers((point.x, point.y))


def test_apply_shm_hides_row_ends(triangle_program, triangle_toolpath):
    boundary = naive_boundaries(triangle_toolpath)
    result = apply_shm(triangle_program, boundary)
    park = len(result.program) - 1
    segments = [s for s in to_toolpath(result.program).segments if s.command_index != park]
    reversals = _x_reversals(segments)
    rect = boundary[1].rect
    assert len(reversals) == 20
    for x, _ in reversals:
        assert x in (pytest.approx(rect.min[0]), pytest.approx(rect.max[0]))
    # without the defense the reversals sit on the triangle itself
    assert all(x < rect.max[0] - 1.0 for x, _ in _x_reversals(triangle_toolpath.segments))


def test_apply_shm_leaves_program_touching_the_boundary_unchanged():
    program = parse_gcode("G0 X0 Y0 Z0.2 F1200\nG1 X10 E1\nG0 Y1\nG1 X0 E2\nG0 Y2\nG1 X10 E3\n")
    result = apply_shm(program, SQUARE)
    assert result.extensions == []
    assert emit_gcode(result.program) == emit_gcode(program)


def test_apply_shm_inherits_feedrate(triangle_program, triangle_toolpath):
    result = apply_shm(triangle_program, naive_boundaries(triangle_toolpath))
    inserted = [c for c, n in zip(result.program.commands, result.program.source_line_numbers) if n is None]
    assert inserted and all(isinstance(c, Move) and c.f is None and c.e is None for c in inserted)
    assert {s.feedrate for s in to_toolpath(result.program).segments} == {1200.0}


def test_apply_shm_fixed_feedrate_restores_modal_feedrate():
    program = parse_gcode("G0 X1 Y5 Z0.2 F900\nG1 X4 E1\nG1 X6 E2\n")
    result = apply_shm(program, SQUARE, ShmConfig(extension_feedrate=6000.0))
    commands = result.program.commands
    assert commands[2:5] == (
        Move("G1", x=10.0, y=5.0, f=6000.0),
        Move("G1", x=4.0, y=5.0),
        Move("G1", f=900.0),
    )
    toolpath = to_toolpath(result.program)
    assert [s.feedrate for s in toolpath.extruding()] == [900.0, 900.0]


def test_apply_shm_without_motion():
    program = GCodeProgram((Comment("; nothing"), Comment("")))
    result = apply_shm(program, SQUARE)
    assert result.program == program
    assert any("no motion segments" in warning for warning in result.warnings)


def test_apply_shm_warns_about_missing_layer(triangle_program):
    result = apply_shm(triangle_program, {})
    assert result.extensions == []
    assert any("no boundary for layer 1" in warning for warning in result.warnings)


def test_apply_shm_rejects_escaping_toolpath(triangle_program):
    with pytest.raises(BoundaryEscapeError):
        apply_shm(triangle_program, RectBoundary(Rect((0.0, 0.0), (50.0, 50.0))))


def test_apply_shm_all_moves_extends_travel():
    program = parse_gcode("G0 X1 Y5 Z0.2 F900\nG0 X4\n")
    assert apply_shm(program, SQUARE).extensions == []
    (extension,) = apply_shm(program, SQUARE, ShmConfig(segment_filter="all_moves")).extensions
    assert extension.point == pytest.approx((10.0, 5.0))


def test_apply_shm_extends_row_starts():
    program = parse_gcode("G0 X6 Y5 Z0.2 F900\nG1 X3 F1500 E1\n")
    result = apply_shm(program, SQUARE, ShmConfig(extend_start=True))
    sides = sorted((e.side, e.point) for e in result.extensions)
    assert sides == [("end", (0.0, 5.0)), ("start", (10.0, 5.0))]
    assert result.program.commands[1:3] == (Move("G1", x=10.0, y=5.0, f=1500.0), Move("G1", x=6.0, y=5.0))
    toolpath = to_toolpath(result.program)
    assert [s.feedrate for s in toolpath.segments[:2]] == [1500.0, 1500.0]


@pytest.mark.parametrize(
    "extend_start, expected",
    [(False, 2.0), (True, 3.0)],
)
def test_equal_area_triangle_time_ratio(extend_start, expected):
    program = triangle_gcode(base=200.0, rows=500, y_step=0.4)
    original = to_toolpath(program)
    config = ShmConfig(margin=0.0, min_extension=0.0, extend_start=extend_start)
    result = apply_shm(program, naive_boundaries(original, margin=0.0), config)
    ratio = print_time(to_toolpath(result.program)) / print_time(original)
    assert ratio == pytest.approx(expected, abs=0.05)


@pytest.mark.parametrize(
    "kwargs",
    [{"margin": -1.0}, {"min_extension": -0.5}, {"segment_filter": "perimeters"}, {"extension_feedrate": 0.0}],
)
def test_shm_config_validation(kwargs):
    with pytest.raises(ConfigError):
        ShmConfig(**kwargs)


def test_save_load_boundaries(tmp_path, triangle_toolpath):
    boundaries = naive_boundaries(triangle_toolpath)
    save_boundaries(boundaries, tmp_path / "boundary.json")
    assert load_boundaries(tmp_path / "boundary.json") == boundaries[1]

    polygon = PolyBoundary(Polygon(((0.0, 0.0), (5.0, 0.0), (0.0, 5.0))))
    save_boundaries({0: polygon, 1: boundaries[1]}, tmp_path / "layers.json")
    assert load_boundaries(tmp_path / "layers.json") == {0: polygon, 1: boundaries[1]}


def test_load_boundaries_rejects_garbage(tmp_path):
    path = tmp_path / "boundary.json"
    path.write_text('{"corners": []}')
    with pytest.raises(FileFormatError):
        load_boundaries(path)


def test_overhead_report_equal_toolpaths(triangle_toolpath):
    table = overhead_report(triangle_toolpath, triangle_toolpath, [300, 500, 1200])
    assert list(table.columns) == ["feedrate", "t_orig_s", "t_obf_s", "added_s", "percent"]
    assert (table["added_s"] == 0).all() and (table["percent"] == 0).all()


def test_overhead_report_is_linear_in_feedrate(triangle_program, triangle_toolpath):
    obfuscated = to_toolpath(apply_shm(triangle_program, naive_boundaries(triangle_toolpath)).program)
    table = overhead_report(triangle_toolpath, obfuscated, [300, 500, 600, 1200])
    products = table["added_s"] * table["feedrate"]
    np.testing.assert_allclose(products, products.iloc[0], rtol=1e-9)
    assert table.loc[0, "added_s"] == pytest.approx(2.0 * table.loc[2, "added_s"])
    np.testing.assert_allclose(table["percent"], table.loc[0, "percent"])
    assert isinstance(table, pd.DataFrame)


def test_overhead_report_rejects_bad_feedrate(triangle_toolpath):
    with pytest.raises(ToolpathError, match="feedrates must be > 0"):
        overhead_report(triangle_toolpath, triangle_toolpath, [0.0])
