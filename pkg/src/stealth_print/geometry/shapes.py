import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import shapely
from shapely.geometry import Point
from shapely.geometry import Polygon as ShapelyPolygon

from stealth_print.errors import FileFormatError, GeometryError

Point2 = tuple[float, float]

CONTAINMENT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in mm."""

    min: Point2
    max: Point2

    def __post_init__(self):
        object.__setattr__(self, "min", (float(self.min[0]), float(self.min[1])))
        object.__setattr__(self, "max", (float(self.max[0]), float(self.max[1])))
        if not (self.min[0] < self.max[0] and self.min[1] < self.max[1]):
            raise GeometryError(f"degenerate rectangle {self.min} -> {self.max}")

    @property
    def width(self) -> float:
        return self.max[0] - self.min[0]

    @property
    def height(self) -> float:
        return self.max[1] - self.min[1]

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def corners(self) -> tuple[Point2, Point2, Point2, Point2]:
        """Counter-clockwise from the minimum corner."""
        (x0, y0), (x1, y1) = self.min, self.max
        return (x0, y0), (x1, y0), (x1, y1), (x0, y1)

    def expand(self, margin: float) -> "Rect":
        return Rect(
            (self.min[0] - margin, self.min[1] - margin),
            (self.max[0] + margin, self.max[1] + margin),
        )

    def covers(self, point: Point2, tolerance: float = CONTAINMENT_TOLERANCE) -> bool:
        """Boundary-inclusive containment."""
        x, y = point[0], point[1]
        return (
            self.min[0] - tolerance <= x <= self.max[0] + tolerance
            and self.min[1] - tolerance <= y <= self.max[1] + tolerance
        )

    def to_polygon(self) -> "Polygon":
        return Polygon(self.corners)


@dataclass(frozen=True)
class Polygon:
    """Simple closed polygon in mm. The closing edge is implicit."""

    vertices: tuple[Point2, ...]

    def __post_init__(self):
        vertices = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(vertices) > 1 and vertices[0] == vertices[-1]:
            vertices = vertices[:-1]
        object.__setattr__(self, "vertices", vertices)
        if len(vertices) < 3:
            raise GeometryError(f"a polygon needs at least 3 vertices, got {len(vertices)}")
        if not self.shape.is_valid or self.shape.area == 0:
            raise GeometryError("polygon is not simple")

    @cached_property
    def shape(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.vertices)

    @property
    def area(self) -> float:
        return float(self.shape.area)

    @property
    def bounds(self) -> Rect:
        xmin, ymin, xmax, ymax = self.shape.bounds
        return Rect((xmin, ymin), (xmax, ymax))

    def covers(self, point: Point2, tolerance: float = CONTAINMENT_TOLERANCE) -> bool:
        """Boundary-inclusive containment with a distance tolerance in mm."""
        return bool(self.shape.distance(Point(point[0], point[1])) <= tolerance)

    def covers_all(self, points, tolerance: float = CONTAINMENT_TOLERANCE) -> bool:
        """Vectorized `covers` over an (n, 2) array of points."""
        if len(points) == 0:
            return True
        geometries = shapely.points(points)
        return bool((shapely.distance(self.shape, geometries) <= tolerance).all())

    @classmethod
    def from_rect(cls, rect: Rect) -> "Polygon":
        return cls(rect.corners)


def save_polygon(polygon: Polygon, path: Path) -> None:
    """Write `{"vertices": [[x_mm, y_mm], ...]}`."""
    payload = {"vertices": [list(vertex) for vertex in polygon.vertices]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_polygon(path: Path) -> Polygon:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        vertices = [(float(x), float(y)) for x, y in payload["vertices"]]
    except (KeyError, TypeError, ValueError) as error:
        raise FileFormatError(f"{path}: not a polygon file ({error})") from error
    return Polygon(tuple(vertices))
