import math
from dataclasses import asdict, dataclass

import loguru
import numpy as np

from stealth_print.acoustics.spikes import ReconstructedPath
from stealth_print.errors import GeometryError
from stealth_print.gcode import Toolpath
from stealth_print.geometry import (
    Polygon,
    ShapeMask,
    binary_closing,
    binary_fill,
    draw_lines,
    fill_polygon,
    footprint,
    polyline_lines,
    procrustes_disparity,
)
from stealth_print.shm import Boundary

logger = loguru.logger


@dataclass(frozen=True)
class ReconstructionScore:
    procrustes: float
    iou: float

    def as_dict(self) -> dict:
        return asdict(self)


def reconstruction_polygon(recon: ReconstructedPath) -> Polygon | None:
    """
    Outline of the reconstructed raster.

    Turn points alternate between the two sides of the part: even points are walked upward,
    odd points back down. None when the outline is not a simple polygon.
    """
    points = recon.points
    if len(points) < 3:
        return None
    outline = np.vstack([points[0::2], points[1::2][::-1]])
    try:
        return Polygon(tuple(map(tuple, outline)))
    except GeometryError:
        return None


def fill_reconstruction(recon: ReconstructedPath, like: ShapeMask) -> ShapeMask:
    """Filled reconstruction on `like`'s grid; falls back to the closed, filled polyline."""
    polygon = reconstruction_polygon(recon)
    if polygon is not None:
        filled = fill_polygon(polygon, like)
        if filled.count:
            return filled
    logger.debug("reconstruction outline is not simple; filling the polyline instead")
    lines = draw_lines(like.with_bits(np.zeros_like(like.bits)), polyline_lines(recon.points))
    return binary_fill(binary_closing(lines, 2))


def iou(a: ShapeMask, b: ShapeMask) -> float:
    a.require_same_shape(b)
    union = np.count_nonzero(a.bits | b.bits)
    return float(np.count_nonzero(a.bits & b.bits) / union) if union else 0.0


def _grow(mask: ShapeMask, xmin: float, ymin: float, xmax: float, ymax: float, spare: int = 1) -> ShapeMask:
    """Pad `mask` by whole cells until its grid covers the box with `spare` empty cells per side."""
    res = mask.resolution
    extent = mask.extent
    left = max(0, math.ceil((extent.min[0] - xmin) / res) + spare)
    bottom = max(0, math.ceil((extent.min[1] - ymin) / res) + spare)
    right = max(0, math.ceil((xmax - extent.max[0]) / res) + spare)
    top = max(0, math.ceil((ymax - extent.max[1]) / res) + spare)
    bits = np.pad(mask.bits, ((bottom, top), (left, right)))
    return ShapeMask(bits, res, (mask.origin[0] - left * res, mask.origin[1] - bottom * res))


def evaluate_against_mask(
    recon: ReconstructedPath, reference: ShapeMask, *, align: bool = True, margin: float = 0.25
) -> ReconstructionScore:
    """
    Compare a reconstruction with a filled reference shape.

    Both shapes are drawn on one grid with an empty border of `margin` times its larger side.
    The matrix Procrustes comparison centers every column, so a shape that fills its grid leaves
    only the border rows to compare.

    Parameters
    ----------
    - recon: reconstructed turn points
    - reference: filled mask of the shape to compare with
    - align: translate the reconstruction so its bounding box starts where the reference does
    - margin: border width as a fraction of the larger grid side

    Returns
    -------
    - Procrustes disparity and intersection over union of the filled shapes
    """
    if len(recon) == 0 or reference.count == 0:
        raise GeometryError("cannot evaluate an empty shape")
    if margin < 0:
        raise GeometryError(f"margin must be >= 0, got {margin}")
    if align:
        target = reference.foreground_points().min(axis=0) - reference.resolution / 2.0
        dx, dy = target - recon.points.min(axis=0)
        recon = recon.translated(float(dx), float(dy))
    (xmin, ymin), (xmax, ymax) = recon.points.min(axis=0), recon.points.max(axis=0)
    lo = np.minimum(recon.points.min(axis=0), reference.extent.min)
    hi = np.maximum(recon.points.max(axis=0), reference.extent.max)
    spare = 1 + math.ceil(margin * float((hi - lo).max()) / reference.resolution)
    grid = _grow(reference, xmin, ymin, xmax, ymax, spare)
    recon_mask = fill_reconstruction(recon, grid)
    score = ReconstructionScore(procrustes_disparity(recon_mask, grid), iou(recon_mask, grid))
    logger.info(f"reconstruction: procrustes {score.procrustes:.4f}, iou {score.iou:.4f}")
    return score


def reference_mask(original: Toolpath, resolution: float = 0.5) -> ShapeMask:
    """Filled footprint of the extruding segments (every segment when none extrudes)."""
    segments = original.extruding() or [s for s in original.segments if s.xy_length > 0]
    if not segments:
        raise GeometryError("toolpath has no XY motion to evaluate against")
    return binary_fill(footprint(segments, resolution, padding=2.0))


def evaluate_reconstruction(
    recon: ReconstructedPath, original: Toolpath, resolution: float = 0.5, *, align: bool = True
) -> ReconstructionScore:
    return evaluate_against_mask(recon, reference_mask(original, resolution), align=align)


def evaluate_against_boundary(
    recon: ReconstructedPath, boundary: Boundary, resolution: float = 0.5, *, align: bool = True
) -> ReconstructionScore:
    polygon = boundary.polygon
    bounds = polygon.bounds
    grid = ShapeMask.covering(*bounds.min, *bounds.max, resolution, padding=resolution)
    return evaluate_against_mask(recon, fill_polygon(polygon, grid), align=align)
