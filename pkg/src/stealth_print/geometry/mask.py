import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import shapely

from stealth_print.errors import FileFormatError, GeometryError
from stealth_print.geometry.shapes import Point2, Polygon, Rect

_PGM_HEADER = re.compile(rb"^P5\s+(\d+)\s+(\d+)\s+(\d+)\s")

Line = tuple[Point2, Point2]


@dataclass(frozen=True, eq=False)
class ShapeMask:
    """
    Binary raster of a 2D shape.

    Row r covers y in [origin_y + r·resolution, origin_y + (r + 1)·resolution); the cell center
    is the point that represents the cell. Columns map to x the same way.

    Attributes
    ----------
    - bits: (height, width) read-only boolean grid
    - resolution: cell side in mm
    - origin: (x, y) of the grid's lower-left corner in mm
    """

    bits: np.ndarray
    resolution: float = 1.0
    origin: Point2 = (0.0, 0.0)

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2 or min(bits.shape) < 1:
            raise GeometryError(f"a mask needs a non-empty 2D grid, got shape {bits.shape}")
        if not self.resolution > 0:
            raise GeometryError(f"resolution must be > 0 mm/cell, got {self.resolution}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShapeMask):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and self.bits.shape == other.bits.shape
            and bool(np.array_equal(self.bits, other.bits))
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        """Number of foreground cells."""
        return int(np.count_nonzero(self.bits))

    @property
    def extent(self) -> Rect:
        """Grid outline in mm."""
        x0, y0 = self.origin
        return Rect((x0, y0), (x0 + self.width * self.resolution, y0 + self.height * self.resolution))

    @classmethod
    def blank(cls, width: int, height: int, resolution: float, origin: Point2 = (0.0, 0.0)):
        return cls(np.zeros((height, width), dtype=bool), resolution, origin)

    @classmethod
    def covering(cls, xmin: float, ymin: float, xmax: float, ymax: float, resolution: float, padding: float = 0.0):
        """Empty grid whose cells cover the box plus `padding` on every side, end cells included."""
        if not resolution > 0:
            raise GeometryError(f"resolution must be > 0 mm/cell, got {resolution}")
        origin = (xmin - padding, ymin - padding)
        width = math.floor((xmax + padding - origin[0]) / resolution + 1e-9) + 1
        height = math.floor((ymax + padding - origin[1]) / resolution + 1e-9) + 1
        return cls.blank(width, height, resolution, origin)

    def with_bits(self, bits: np.ndarray) -> "ShapeMask":
        """New mask on the same grid."""
        bits = np.asarray(bits, dtype=bool)
        if bits.shape != self.bits.shape:
            raise GeometryError(f"dimension mismatch: {bits.shape} vs {self.bits.shape}")
        return ShapeMask(bits, self.resolution, self.origin)

    def same_grid(self, other: "ShapeMask") -> bool:
        return (
            self.bits.shape == other.bits.shape
            and self.resolution == other.resolution
            and self.origin == other.origin
        )

    def require_same_shape(self, other: "ShapeMask") -> None:
        if self.bits.shape != other.bits.shape:
            raise GeometryError(
                f"dimension mismatch: {self.height}x{self.width} vs {other.height}x{other.width}"
            )

    def __and__(self, other: "ShapeMask") -> "ShapeMask":
        self.require_same_shape(other)
        return self.with_bits(self.bits & other.bits)

    def __or__(self, other: "ShapeMask") -> "ShapeMask":
        self.require_same_shape(other)
        return self.with_bits(self.bits | other.bits)

    def __sub__(self, other: "ShapeMask") -> "ShapeMask":
        self.require_same_shape(other)
        return self.with_bits(self.bits & ~other.bits)

    def issubset(self, other: "ShapeMask") -> bool:
        self.require_same_shape(other)
        return not bool((self.bits & ~other.bits).any())

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """x coordinates of the columns and y coordinates of the rows, in mm."""
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.resolution
        return xs, ys

    def foreground_points(self) -> np.ndarray:
        """(n, 2) array of foreground cell centers in mm."""
        rows, cols = np.nonzero(self.bits)
        return np.column_stack(
            [
                self.origin[0] + (cols + 0.5) * self.resolution,
                self.origin[1] + (rows + 0.5) * self.resolution,
            ]
        )

    def to_cell(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of the cell containing a point, clipped to the grid."""
        col = math.floor((x - self.origin[0]) / self.resolution + 1e-9)
        row = math.floor((y - self.origin[1]) / self.resolution + 1e-9)
        return min(max(row, 0), self.height - 1), min(max(col, 0), self.width - 1)


def _supercover(u0: float, v0: float, u1: float, v1: float) -> list[tuple[int, int]]:
    """Cells (row, col) crossed by a line in grid units, corner crossings included."""
    col, row = math.floor(u0 + 1e-9), math.floor(v0 + 1e-9)
    col_end, row_end = math.floor(u1 + 1e-9), math.floor(v1 + 1e-9)
    du, dv = u1 - u0, v1 - v0
    step_col = 1 if du > 0 else -1
    step_row = 1 if dv > 0 else -1
    t_col = ((col + (step_col > 0)) - u0) / du if du else math.inf
    t_row = ((row + (step_row > 0)) - v0) / dv if dv else math.inf
    delta_col = abs(1.0 / du) if du else math.inf
    delta_row = abs(1.0 / dv) if dv else math.inf
    cells = [(row, col)]
    budget = abs(col_end - col) + abs(row_end - row)
    while (row, col) != (row_end, col_end) and budget > 0:
        if abs(t_col - t_row) < 1e-12:
            cells += [(row, col + step_col), (row + step_row, col)]
            col, row = col + step_col, row + step_row
            t_col, t_row = t_col + delta_col, t_row + delta_row
            budget -= 2
        elif t_col < t_row:
            col += step_col
            t_col += delta_col
            budget -= 1
        else:
            row += step_row
            t_row += delta_row
            budget -= 1
        cells.append((row, col))
    return cells


def draw_lines(grid: ShapeMask, lines: Iterable[Line]) -> ShapeMask:
    """Draw 1-cell-wide lines on a copy of `grid`. Cells outside the grid are dropped."""
    bits = np.array(grid.bits)
    ox, oy = grid.origin
    for (x0, y0), (x1, y1) in lines:
        cells = _supercover(
            (x0 - ox) / grid.resolution,
            (y0 - oy) / grid.resolution,
            (x1 - ox) / grid.resolution,
            (y1 - oy) / grid.resolution,
        )
        for row, col in cells:
            if 0 <= row < grid.height and 0 <= col < grid.width:
                bits[row, col] = True
    return grid.with_bits(bits)


def rasterize_lines(
    lines: Sequence[Line],
    resolution: float = 0.5,
    padding: float = 0.0,
    like: ShapeMask | None = None,
) -> ShapeMask:
    """
    Rasterize 2D line segments with a supercover traversal.

    Parameters
    ----------
    - lines: ((x0, y0), (x1, y1)) pairs in mm
    - resolution: mm/cell, ignored when `like` is given
    - padding: empty margin around the bounding box in mm, ignored when `like` is given
    - like: draw on this grid instead of a fitted one

    Returns
    -------
    - the rasterized mask
    """
    if not lines:
        raise GeometryError("nothing to rasterize: empty layer")
    if like is None:
        points = np.array([p for line in lines for p in line], dtype=float)
        (xmin, ymin), (xmax, ymax) = points.min(axis=0), points.max(axis=0)
        like = ShapeMask.covering(xmin, ymin, xmax, ymax, resolution, padding)
    return draw_lines(like.with_bits(np.zeros_like(like.bits)), lines)


def rasterize(segments, resolution: float = 0.5, padding: float = 0.0, like: ShapeMask | None = None) -> ShapeMask:
    """
    Rasterize the XY projection of toolpath segments.

    Parameters
    ----------
    - segments: sequence of `Segment` (one layer)
    - resolution: mm/cell
    - padding: margin in mm; the mask origin is the bounding-box minimum minus the padding
    - like: optional grid to draw on

    Returns
    -------
    - the mask with every segment drawn 1 cell wide
    """
    lines = [((s.start[0], s.start[1]), (s.end[0], s.end[1])) for s in segments]
    return rasterize_lines(lines, resolution, padding, like)


def polyline_lines(points: Sequence[Point2], closed: bool = False) -> list[Line]:
    """Consecutive point pairs of a polyline."""
    pts = [(float(x), float(y)) for x, y in points]
    if closed and len(pts) > 2:
        pts.append(pts[0])
    if len(pts) == 1:
        return [(pts[0], pts[0])]
    return list(zip(pts[:-1], pts[1:]))


def fill_polygon(polygon: Polygon, like: ShapeMask) -> ShapeMask:
    """Cells of `like`'s grid whose centers lie in the polygon, boundary included."""
    xs, ys = like.cell_centers()
    grid_x, grid_y = np.meshgrid(xs, ys)
    inside = shapely.intersects_xy(polygon.shape, grid_x, grid_y)
    return like.with_bits(inside)


def rect_mask(rect: Rect, like: ShapeMask) -> ShapeMask:
    """Cells of `like`'s grid whose centers lie in the rectangle, boundary included."""
    xs, ys = like.cell_centers()
    in_x = (xs >= rect.min[0] - 1e-9) & (xs <= rect.max[0] + 1e-9)
    in_y = (ys >= rect.min[1] - 1e-9) & (ys <= rect.max[1] + 1e-9)
    return like.with_bits(np.outer(in_y, in_x))


def regrid(mask: ShapeMask, like: ShapeMask) -> ShapeMask:
    """
    Copy a mask onto another grid with the same resolution.

    Grid origins must differ by a whole number of cells and every foreground cell must land
    inside the target grid.
    """
    if not math.isclose(mask.resolution, like.resolution, rel_tol=1e-12):
        raise GeometryError(f"cannot regrid {mask.resolution} mm/cell onto {like.resolution} mm/cell")
    shift = np.subtract(mask.origin, like.origin) / like.resolution
    offset = np.round(shift).astype(int)
    if not np.allclose(shift, offset, atol=1e-6):
        raise GeometryError("grid origins are not aligned on whole cells")
    rows, cols = np.nonzero(mask.bits)
    rows, cols = rows + offset[1], cols + offset[0]
    if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= like.height or cols.max() >= like.width):
        raise GeometryError("mask does not fit in the target grid")
    bits = np.zeros_like(like.bits)
    bits[rows, cols] = True
    return like.with_bits(bits)


def save_mask(mask: ShapeMask, path: Path) -> None:
    """
    Write a binary PGM (P5, 0/255) plus a JSON sidecar with the grid geometry.

    The top image row is the highest-y row, so viewers show the shape upright. The sidecar has
    the same name with a `.json` suffix.
    """
    path = Path(path)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    pixels = np.where(mask.bits[::-1], 255, 0).astype(np.uint8)
    path.write_bytes(header + pixels.tobytes())
    sidecar = {
        "resolution_mm": mask.resolution,
        "origin_x_mm": mask.origin[0],
        "origin_y_mm": mask.origin[1],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")


def load_mask(path: Path) -> ShapeMask:
    path = Path(path)
    data = path.read_bytes()
    match = _PGM_HEADER.match(data)
    if match is None or int(match.group(3)) != 255:
        raise FileFormatError(f"{path}: not a binary 8-bit PGM")
    width, height = int(match.group(1)), int(match.group(2))
    pixels = np.frombuffer(data[match.end():], dtype=np.uint8)
    if pixels.size != width * height:
        raise FileFormatError(f"{path}: expected {width * height} pixels, got {pixels.size}")
    if not np.isin(pixels, (0, 255)).all():
        raise FileFormatError(f"{path}: pixels must be 0 or 255")
    try:
        sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        resolution = float(sidecar["resolution_mm"])
        origin = (float(sidecar["origin_x_mm"]), float(sidecar["origin_y_mm"]))
    except (OSError, KeyError, TypeError, ValueError) as error:
        raise FileFormatError(f"{path}: missing or malformed sidecar ({error})") from error
    bits = pixels.reshape(height, width)[::-1] == 255
    return ShapeMask(bits, resolution, origin)
