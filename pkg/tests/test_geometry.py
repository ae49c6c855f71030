import numpy as np
import pytest

from stealth_print.errors import FileFormatError, GeometryError
from stealth_print.gcode import Point3, Segment
from stealth_print.geometry import (
    Polygon,
    Rect,
    ShapeMask,
    added_area,
    binary_closing,
    convex_hull_mask,
    extract_boundary_polygon,
    fill_polygon,
    footprint,
    is_connected,
    load_mask,
    load_polygon,
    procrustes_disparity,
    rasterize,
    rect_mask,
    regrid,
    save_mask,
    save_polygon,
    trace_contour,
)


def _mask(rows: list[str], resolution: float = 1.0) -> ShapeMask:
    """Mask from ASCII art; the first string is row 0."""
    return ShapeMask(np.array([[c == "#" for c in row] for row in rows]), resolution)


def _segment(x0, y0, x1, y1, extruding=True) -> Segment:
    return Segment(Point3(x0, y0, 0.2), Point3(x1, y1, 0.2), 1200.0, extruding=extruding)


@pytest.fixture
def square_mask() -> ShapeMask:
    bits = np.zeros((14, 14), dtype=bool)
    bits[2:12, 2:12] = True
    return ShapeMask(bits, 1.0)


@pytest.fixture
def disk_mask() -> ShapeMask:
    rows, cols = np.mgrid[0:17, 0:17]
    return ShapeMask((rows - 8) ** 2 + (cols - 8) ** 2 <= 36, 0.5, (3.0, -2.0))


def test_mask_is_read_only(square_mask):
    with pytest.raises(ValueError):
        square_mask.bits[0, 0] = True


def test_rasterize_horizontal_segment():
    mask = rasterize([_segment(0, 0, 10, 0)], resolution=1.0, padding=0.0)
    assert (mask.height, mask.width) == (1, 11)
    assert mask.count == 11
    assert mask.origin == (0.0, 0.0)


def test_rasterize_padding_moves_origin():
    mask = rasterize([_segment(5, 5, 10, 5)], resolution=1.0, padding=2.0)
    assert mask.origin == (3.0, 3.0)
    assert mask.count == 6


def test_rasterize_zero_length_segment():
    mask = rasterize([_segment(1, 1, 1, 1)], resolution=0.5)
    assert mask.count == 1


def test_rasterize_diagonal_is_connected():
    mask = rasterize([_segment(0, 0, 7.3, 3.1)], resolution=0.5)
    assert is_connected(mask)


def test_rasterize_halving_resolution_doubles_cells():
    layer = [_segment(0, 0, 100, 0), _segment(100, 0, 100, 50)]
    coarse = rasterize(layer, resolution=1.0)
    fine = rasterize(layer, resolution=0.5)
    assert fine.count / coarse.count == pytest.approx(2.0, rel=0.02)


def test_rasterize_empty_layer():
    with pytest.raises(GeometryError, match="empty layer"):
        rasterize([], resolution=1.0)


def test_convex_hull_of_tromino():
    tromino = _mask(["##", "#."])
    # the hull of the three centers is a triangle; the fourth center lies outside it
    assert convex_hull_mask(tromino) == tromino


def test_convex_hull_fills_triangle():
    ell = _mask(["#....", "#....", "#....", "#....", "#####"])
    hull = convex_hull_mask(ell)
    assert hull.count == 15
    assert ell.issubset(hull)


def test_convex_hull_trivial_cases():
    single = _mask([".....", "..#..", "....."])
    assert convex_hull_mask(single) == single
    rect = _mask(["......", ".####.", ".####.", "......"])
    assert convex_hull_mask(rect) == rect


def test_convex_hull_of_empty_mask():
    with pytest.raises(GeometryError):
        convex_hull_mask(_mask(["...", "..."]))


def test_closing_fills_gap():
    closed = binary_closing(_mask(["#.#"]), radius=1)
    assert closed == _mask(["###"])


def test_closing_keeps_solid_rectangle_and_empty_mask():
    rect = _mask(["####", "####", "####"])
    assert binary_closing(rect, 2) == rect
    empty = _mask(["....", "...."])
    assert binary_closing(empty, 1) == empty


def test_closing_extensive_and_idempotent(rng):
    mask = ShapeMask(rng.random((30, 40)) > 0.7, 0.5)
    once = binary_closing(mask, 2)
    assert mask.issubset(once)
    assert binary_closing(once, 2) == once


def test_closing_rejects_zero_radius():
    with pytest.raises(GeometryError):
        binary_closing(_mask(["#"]), 0)


def test_connectivity():
    assert is_connected(_mask(["#.", ".#"]))
    assert not is_connected(_mask(["#.#"]))
    assert is_connected(_mask(["..", ".."]))


def test_boundary_of_square(square_mask):
    polygon = extract_boundary_polygon(square_mask, 0.5)
    assert len(polygon.vertices) == 4
    assert polygon.covers_all(square_mask.foreground_points())


def test_boundary_raw_contour_keeps_every_cell(square_mask):
    polygon = extract_boundary_polygon(square_mask, 0.0)
    assert len(polygon.vertices) == len(trace_contour(square_mask)) == 36


def test_boundary_of_strip_is_degenerate():
    with pytest.raises(GeometryError, match="fewer than 3 boundary cells"):
        extract_boundary_polygon(_mask(["......", ".####.", "......"]), 0.5)


def test_strip_contour_walks_there_and_back():
    strip = _mask(["......", ".####.", "......"])
    assert trace_contour(strip) == [(1, 1), (1, 2), (1, 3), (1, 4), (1, 3), (1, 2)]


def test_single_cell_contour():
    assert trace_contour(_mask(["...", ".#.", "..."])) == [(1, 1)]


def test_boundary_of_diagonal_line_is_degenerate():
    with pytest.raises(GeometryError, match="fewer than 3 boundary cells"):
        extract_boundary_polygon(_mask(["#...", ".#..", "..#.", "...#"]), 0.5)


def test_boundary_of_disconnected_mask():
    with pytest.raises(GeometryError, match="not connected"):
        extract_boundary_polygon(_mask(["##..##", "##..##"]), 0.5)


def test_boundary_contains_every_center(disk_mask):
    for tolerance in (0.0, 0.25, 1.0):
        polygon = extract_boundary_polygon(disk_mask, tolerance)
        assert polygon.covers_all(disk_mask.foreground_points())


def test_boundary_tolerance_monotone(disk_mask):
    counts = [
        len(extract_boundary_polygon(disk_mask, tolerance).vertices)
        for tolerance in (0.125, 0.25, 0.5, 1.0, 2.0)
    ]
    assert counts == sorted(counts, reverse=True)


def test_procrustes_identity(square_mask):
    assert procrustes_disparity(square_mask, square_mask) == pytest.approx(0.0, abs=1e-9)


def test_procrustes_square_against_dot():
    square = np.zeros((10, 10), dtype=bool)
    square[2:8, 2:8] = True
    dot = np.zeros((10, 10), dtype=bool)
    dot[0, 0] = True
    disparity = procrustes_disparity(ShapeMask(square), ShapeMask(dot))
    # a 6x6 block against a single cell: 1 - 2.16 / (14.4 * 0.9)
    assert disparity == pytest.approx(5 / 6)
    assert disparity > 0.5


def test_procrustes_symmetric(rng):
    a = ShapeMask(rng.random((12, 12)) > 0.5)
    b = ShapeMask(rng.random((12, 12)) > 0.5)
    assert procrustes_disparity(a, b) == pytest.approx(procrustes_disparity(b, a), abs=1e-9)


def test_procrustes_translation_invariant():
    a = np.zeros((20, 20), dtype=bool)
    a[5:9, 4:12] = True
    a[9:12, 4:6] = True
    b = np.zeros((20, 20), dtype=bool)
    b[6:10, 6:9] = True
    base = procrustes_disparity(ShapeMask(a), ShapeMask(b))
    shifted = procrustes_disparity(
        ShapeMask(np.roll(a, (3, 4), axis=(0, 1))), ShapeMask(np.roll(b, (3, 4), axis=(0, 1)))
    )
    assert shifted == pytest.approx(base, abs=1e-6)


def test_procrustes_rotation_invariant():
    ell = _mask(["#.....", "#.....", "#.....", "####..", "......", "......"])
    blob = _mask(["......", ".##...", ".###..", "..#...", "......", "......"])
    base = procrustes_disparity(ell, blob, orientation_invariant=True)
    for k in (1, 2, 3):
        rotated = ShapeMask(np.rot90(blob.bits, k))
        assert procrustes_disparity(ell, rotated, orientation_invariant=True) == pytest.approx(base, abs=1e-6)
        assert procrustes_disparity(
            ell, ShapeMask(np.rot90(ell.bits, k)), orientation_invariant=True
        ) == pytest.approx(0.0, abs=1e-6)


def test_procrustes_errors(square_mask):
    with pytest.raises(GeometryError, match="dimension mismatch"):
        procrustes_disparity(square_mask, _mask(["#"]))
    with pytest.raises(GeometryError, match="zero-norm"):
        procrustes_disparity(square_mask, ShapeMask(np.zeros((14, 14), dtype=bool)))


def test_added_area():
    original = _mask([".....", ".###.", ".###.", ".....", "....."])
    img_neg = _mask(["#####", "#...#", "#...#", "#####", "....."])
    assert added_area(original, img_neg) == 0
    full = ShapeMask(np.ones((5, 5), dtype=bool))
    assert added_area(full, img_neg) == img_neg.count == 14
    grown = _mask(["..##.", ".####", ".###.", ".#...", "....."])
    # cells (0,2), (0,3), (1,4), (3,1)
    assert added_area(grown, img_neg) == 4


def test_added_area_dimension_mismatch():
    with pytest.raises(GeometryError):
        added_area(_mask(["#"]), _mask(["##"]))


def test_fill_polygon_and_rect_mask():
    grid = ShapeMask.blank(10, 10, 1.0)
    triangle = Polygon(((0.0, 0.0), (10.0, 0.0), (0.0, 10.0)))
    filled = fill_polygon(triangle, grid)
    # centers (c + 0.5, r + 0.5) with c + r + 1 <= 10
    assert filled.count == 55
    rect = rect_mask(Rect((2.0, 2.0), (5.0, 4.0)), grid)
    assert rect.count == 3 * 2


def test_footprint_closes_hatch_lines():
    hatch = [_segment(0, y, 10, y) for y in np.arange(0.0, 10.01, 0.8)]
    shape = footprint(hatch, resolution=0.5, padding=1.0, closing_radius=2)
    rows, cols = np.nonzero(shape.bits)
    inside = shape.bits[rows.min():rows.max() + 1, cols.min():cols.max() + 1]
    assert inside.all()


def test_regrid_round_trip(disk_mask):
    bigger = ShapeMask.blank(30, 25, 0.5, (0.0, -4.0))
    moved = regrid(disk_mask, bigger)
    assert moved.count == disk_mask.count
    assert regrid(moved, disk_mask) == disk_mask


def test_regrid_rejects_misaligned_grid(disk_mask):
    with pytest.raises(GeometryError):
        regrid(disk_mask, ShapeMask.blank(30, 30, 0.5, (0.1, 0.0)))


def test_save_load_mask(tmp_path, disk_mask):
    path = tmp_path / "disk.pgm"
    save_mask(disk_mask, path)
    assert (tmp_path / "disk.json").exists()
    assert load_mask(path) == disk_mask


def test_load_mask_rejects_garbage(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(FileFormatError):
        load_mask(path)


def test_save_load_polygon(tmp_path):
    polygon = Polygon(((0.0, 0.0), (4.5, 0.0), (4.5, 2.25), (0.0, 3.0)))
    save_polygon(polygon, tmp_path / "boundary.json")
    assert load_polygon(tmp_path / "boundary.json") == polygon


def test_polygon_rejects_self_intersection():
    with pytest.raises(GeometryError):
        Polygon(((0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)))
