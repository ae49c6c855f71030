import loguru
import numpy as np
import scipy.ndimage as ndi
import shapely
from shapely.geometry import MultiPoint
from skimage.measure import approximate_polygon

from stealth_print.errors import GeometryError
from stealth_print.geometry.mask import ShapeMask, rasterize
from stealth_print.geometry.shapes import Polygon

logger = loguru.logger

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# Clockwise Moore neighbourhood in (row, col) offsets, starting north.
_NEIGHBOURS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_NEIGHBOUR_INDEX = {offset: k for k, offset in enumerate(_NEIGHBOURS)}


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def convex_hull_mask(mask: ShapeMask) -> ShapeMask:
    """
    Filled convex hull of the foreground cell centers, on the same grid.

    Cells whose centers lie on the hull boundary are included, so the result is a superset of
    the input. Degenerate hulls (a point or a line) are handled.
    """
    if mask.count == 0:
        raise GeometryError("convex hull of an empty mask")
    rows, cols = np.nonzero(mask.bits)
    hull = MultiPoint(np.column_stack([cols, rows]).astype(float)).convex_hull
    grid_cols, grid_rows = np.meshgrid(np.arange(mask.width), np.arange(mask.height))
    inside = shapely.intersects_xy(hull, grid_cols.astype(float), grid_rows.astype(float))
    return mask.with_bits(inside | mask.bits)


def binary_closing(mask: ShapeMask, radius: int = 2) -> ShapeMask:
    """
    Dilation then erosion with a (2·radius + 1) square.

    The grid is padded during the operation so cells near the border are never eroded away;
    the result always contains the input.
    """
    if radius < 1:
        raise GeometryError(f"closing radius must be >= 1 cell, got {radius}")
    padded = np.pad(mask.bits, radius)
    closed = ndi.binary_closing(padded, structure=_square(radius))
    return mask.with_bits(closed[radius:-radius, radius:-radius] | mask.bits)


def dilate(mask: ShapeMask, radius: int = 1) -> ShapeMask:
    """Square dilation, clipped to the grid."""
    if radius < 1:
        return mask
    return mask.with_bits(ndi.binary_dilation(mask.bits, structure=_square(radius)))


def binary_fill(mask: ShapeMask) -> ShapeMask:
    """Fill enclosed background regions."""
    return mask.with_bits(ndi.binary_fill_holes(mask.bits))


def component_count(mask: ShapeMask) -> int:
    """Number of 8-connected foreground components."""
    _, count = ndi.label(mask.bits, structure=EIGHT_CONNECTED)
    return int(count)


def is_connected(mask: ShapeMask) -> bool:
    """True when the foreground is one 8-connected component (an empty mask is connected)."""
    return component_count(mask) <= 1


def added_area(result: ShapeMask, img_neg: ShapeMask) -> int:
    """Number of cells set in both masks."""
    result.require_same_shape(img_neg)
    return int(np.count_nonzero(result.bits & img_neg.bits))


def footprint(segments, resolution: float = 0.5, padding: float = 1.0, closing_radius: int = 2) -> ShapeMask:
    """
    Deposited shape of one layer: extruding segments rasterized and closed.

    Falls back to every segment when none extrudes. `padding` should leave room for the
    closing.
    """
    segments = list(segments)
    extruding = [segment for segment in segments if segment.extruding] or segments
    lines = rasterize(extruding, resolution, padding)
    return binary_closing(lines, closing_radius)


def trace_contour(mask: ShapeMask) -> list[tuple[int, int]]:
    """
    Outer boundary cells (row, col) by Moore neighbour tracing.

    Starts at the first foreground cell in row-major order and stops when that cell is entered
    again from the same neighbour (Jacob's criterion), or when the first move out of it is about
    to be repeated. Thin parts are visited twice.
    """
    rows, cols = np.nonzero(mask.bits)
    if len(rows) == 0:
        return []
    start = (int(rows[0]), int(cols[0]))
    padded = np.pad(mask.bits, 1)

    def foreground(cell: tuple[int, int]) -> bool:
        return bool(padded[cell[0] + 1, cell[1] + 1])

    start_back = (start[0], start[1] - 1)
    current, back = start, start_back
    first_move = None
    contour = [start]
    for _ in range(8 * mask.bits.size + 8):
        k = _NEIGHBOUR_INDEX[(back[0] - current[0], back[1] - current[1])]
        for step in range(1, 9):
            j = (k + step) % 8
            candidate = (current[0] + _NEIGHBOURS[j][0], current[1] + _NEIGHBOURS[j][1])
            if foreground(candidate):
                previous = _NEIGHBOURS[(j - 1) % 8]
                back = (current[0] + previous[0], current[1] + previous[1])
                break
        else:
            return contour
        move = (current, candidate)
        if first_move is None:
            first_move = move
        elif move == first_move:
            # start was appended when it was entered
            return contour[:-1]
        current = candidate
        if current == start and back == start_back:
            return contour
        contour.append(current)
    raise GeometryError("contour tracing did not terminate")


def _cells_to_mm(mask: ShapeMask, cells) -> np.ndarray:
    cells = np.asarray(cells, dtype=float)
    return np.column_stack(
        [
            mask.origin[0] + (cells[:, 1] + 0.5) * mask.resolution,
            mask.origin[1] + (cells[:, 0] + 0.5) * mask.resolution,
        ]
    )


def extract_boundary_polygon(mask: ShapeMask, simplify_tolerance: float = 0.0) -> Polygon:
    """
    Outer contour of a connected mask as a polygon in mm.

    Parameters
    ----------
    - mask: connected mask with at least 3 non-collinear boundary cells
    - simplify_tolerance: Douglas-Peucker tolerance in mm; 0 keeps every traced cell

    Returns
    -------
    - a polygon covering every foreground cell center

    When a simplified polygon would leave a foreground cell center outside, the tolerance is
    halved until it does not, ending at the raw contour.
    """
    if not is_connected(mask):
        raise GeometryError("mask is not connected; close or connect its components first")
    cells = np.column_stack(np.nonzero(mask.bits)).astype(float)
    if len(cells) < 3 or np.linalg.matrix_rank(cells - cells[0]) < 2:
        raise GeometryError("fewer than 3 boundary cells span an area")
    cells = trace_contour(mask)

    contour = _cells_to_mm(mask, cells)
    centers = mask.foreground_points()
    tolerance = float(simplify_tolerance)
    while tolerance >= 1e-3 * mask.resolution:
        closed = np.vstack([contour, contour[:1]])
        simplified = approximate_polygon(closed, tolerance=tolerance)
        try:
            polygon = Polygon(tuple(map(tuple, simplified)))
        except GeometryError:
            polygon = None
        if polygon is not None and polygon.covers_all(centers):
            return polygon
        logger.debug(f"simplification at {tolerance} mm loses cells, halving")
        tolerance /= 2.0
    try:
        return Polygon(tuple(map(tuple, contour)))
    except GeometryError as error:
        raise GeometryError(f"traced contour is not a simple polygon ({error})") from error
