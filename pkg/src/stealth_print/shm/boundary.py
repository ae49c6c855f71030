import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

import numpy as np
from shapely.geometry import LineString

from stealth_print.errors import BoundaryEscapeError, FileFormatError
from stealth_print.gcode import Segment, Toolpath
from stealth_print.geometry import Point2, Polygon, Rect

CONTAINMENT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class RectBoundary:
    rect: Rect

    @property
    def polygon(self) -> Polygon:
        return self.rect.to_polygon()

    def covers(self, point: Point2, tolerance: float = CONTAINMENT_TOLERANCE) -> bool:
        return self.rect.covers(point, tolerance)


@dataclass(frozen=True)
class PolyBoundary:
    polygon: Polygon

    def covers(self, point: Point2, tolerance: float = CONTAINMENT_TOLERANCE) -> bool:
        return self.polygon.covers(point, tolerance)


Boundary = Union[RectBoundary, PolyBoundary]


def _rect_exit(rect: Rect, origin: Point2, direction: Point2) -> tuple[float, Point2] | None:
    hits: list[tuple[float, Point2]] = []
    (x0, y0), (x1, y1) = rect.min, rect.max
    px, py = origin
    dx, dy = direction
    if dx:
        wall = x1 if dx > 0 else x0
        t = (wall - px) / dx
        hits.append((t, (wall, min(max(py + t * dy, y0), y1))))
    if dy:
        wall = y1 if dy > 0 else y0
        t = (wall - py) / dy
        hits.append((t, (min(max(px + t * dx, x0), x1), wall)))
    if not hits:
        return None
    return min(hits, key=lambda hit: hit[0])


def _polygon_exit(polygon: Polygon, origin: Point2, direction: Point2) -> tuple[float, Point2] | None:
    xmin, ymin, xmax, ymax = polygon.shape.bounds
    reach = 2.0 * math.hypot(xmax - xmin, ymax - ymin) + math.dist(origin, (xmin, ymin)) + 1.0
    far = (origin[0] + reach * direction[0], origin[1] + reach * direction[1])
    crossing = LineString([origin, far]).intersection(polygon.shape.exterior)
    if crossing.is_empty:
        return None
    parts = getattr(crossing, "geoms", [crossing])
    points = np.array([coord for part in parts for coord in part.coords], dtype=float)
    t = (points - np.asarray(origin)) @ np.asarray(direction)
    ahead = t > 1e-9
    if not ahead.any():
        return None
    k = int(np.argmin(np.where(ahead, t, np.inf)))
    q = (float(points[k, 0]), float(points[k, 1]))
    midpoint = ((origin[0] + q[0]) / 2.0, (origin[1] + q[1]) / 2.0)
    if not polygon.covers(midpoint, CONTAINMENT_TOLERANCE):
        return None
    return float(t[k]), q


def extension_point(segment: Segment, boundary: Boundary, min_extension: float = 1.0) -> Point2 | None:
    """
    Point where the segment, continued forward, meets the boundary.

    Parameters
    ----------
    - segment: a segment with XY travel, whose end lies in the boundary
    - boundary: rectangle or polygon boundary
    - min_extension: extensions shorter than this many mm are not worth a move

    Returns
    -------
    - the nearest forward intersection, or None when it is closer than `min_extension` (or the
      ray leaves the boundary straight away)
    """
    end = (segment.end[0], segment.end[1])
    if not boundary.covers(end):
        raise BoundaryEscapeError(f"toolpath escapes boundary at ({end[0]:.3f}, {end[1]:.3f})")
    direction = segment.direction_xy
    if direction is None:
        return None
    if isinstance(boundary, RectBoundary):
        hit = _rect_exit(boundary.rect, end, direction)
    else:
        hit = _polygon_exit(boundary.polygon, end, direction)
    if hit is None or hit[0] <= 1e-9 or hit[0] < min_extension:
        return None
    return hit[1]


def naive_boundaries(toolpath: Toolpath, margin: float = 2.0) -> dict[int, RectBoundary]:
    """One rectangle per layer: the bounding box of its extruding segments plus `margin`."""
    boundaries = {}
    for layer in toolpath.layers():
        extruding = [segment for segment in toolpath.layer(layer) if segment.extruding]
        if not extruding:
            continue
        low, high = _bounds(extruding)
        boundaries[layer] = RectBoundary(Rect(low, high).expand(margin))
    return boundaries


def _bounds(segments: list[Segment]) -> tuple[Point2, Point2]:
    points = np.array([p[:2] for s in segments for p in (s.start, s.end)])
    low, high = points.min(axis=0), points.max(axis=0)
    return (float(low[0]), float(low[1])), (float(high[0]), float(high[1]))


def check_containment(segments, boundary: Boundary) -> None:
    """Raise `BoundaryEscapeError` if any segment endpoint lies outside the boundary."""
    for segment in segments:
        for point in (segment.start, segment.end):
            if not boundary.covers((point[0], point[1])):
                raise BoundaryEscapeError(
                    f"toolpath escapes boundary at ({point[0]:.3f}, {point[1]:.3f})"
                    f" on layer {segment.layer}"
                )


def boundary_to_json(boundary: Boundary) -> dict:
    payload: dict = {"vertices": [list(vertex) for vertex in boundary.polygon.vertices]}
    if isinstance(boundary, RectBoundary):
        payload["rect"] = {"min": list(boundary.rect.min), "max": list(boundary.rect.max)}
    return payload


def boundary_from_json(payload: dict) -> Boundary:
    if "rect" in payload:
        return RectBoundary(Rect(tuple(payload["rect"]["min"]), tuple(payload["rect"]["max"])))
    return PolyBoundary(Polygon(tuple((float(x), float(y)) for x, y in payload["vertices"])))


def save_boundaries(boundaries: Mapping[int, Boundary], path: Path) -> None:
    """
    Write boundaries as JSON.

    A single boundary shared by every layer is written as `{"vertices": [[x, y], ...]}`
    (plus `"rect"` for rectangles); otherwise `{"layers": {"<index>": {...}}}`.
    """
    if len(set(boundaries.values())) == 1:
        payload = boundary_to_json(next(iter(boundaries.values())))
    else:
        payload = {"layers": {str(k): boundary_to_json(b) for k, b in sorted(boundaries.items())}}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_boundaries(path: Path) -> Boundary | dict[int, Boundary]:
    """Inverse of `save_boundaries`: one boundary, or a mapping layer -> boundary."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if "layers" in payload:
            return {int(k): boundary_from_json(v) for k, v in payload["layers"].items()}
        return boundary_from_json(payload)
    except (KeyError, TypeError, ValueError) as error:
        raise FileFormatError(f"{path}: not a boundary file ({error})") from error
