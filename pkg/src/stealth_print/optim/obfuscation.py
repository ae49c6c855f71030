import math
from dataclasses import dataclass, field
from pathlib import Path

import loguru
import numpy as np
import pandas as pd
from numpy.random import PCG64, Generator

from stealth_print.errors import BoundaryEscapeError, ConfigError, OptimizationError
from stealth_print.gcode import Toolpath
from stealth_print.geometry import (
    ShapeMask,
    added_area,
    binary_closing,
    convex_hull_mask,
    dilate,
    extract_boundary_polygon,
    is_connected,
    procrustes_disparity,
    save_mask,
)
from stealth_print.shm import PolyBoundary

logger = loguru.logger

CONCAVE_ADD = "concave_add"
CONVEX_REMOVE = "convex_remove"
TRACE_COLUMNS = ["iter", "disparity", "added_cells", "normalized_area", "reward"]


@dataclass(frozen=True)
class OptimizerParams:
    """
    Parameters of the randomized rectangle search.

    Attributes
    ----------
    - seed: seed of the PCG64 stream
    - min_s, max_s: inclusive range of rectangle sides, in cells
    - attempts: placement tries per rectangle before it is skipped
    - start, stop, step: cumulative rectangle budget schedule
    - first_batch: rectangles placed before the first recorded iteration
    - closing_radius: radius in cells of the closing applied after every batch (concave mode)
    - area_weight: λ in R = D − λ·Â
    - convexity_ratio_threshold: hull/original area ratio under which convex mode is used
    - bounding_enlargement_range: (lo, hi) fractions of the extent added to each bounding box side
    """

    seed: int = 42
    min_s: int = 1
    max_s: int = 3
    attempts: int = 50
    start: int = 100
    stop: int = 5000
    step: int = 20
    first_batch: int = 100
    closing_radius: int = 2
    area_weight: float = 1.0
    convexity_ratio_threshold: float = 1.05
    bounding_enlargement_range: tuple[float, float] = (0.1, 0.3)

    def __post_init__(self):
        if not 1 <= self.min_s <= self.max_s:
            raise ConfigError(f"need 1 <= min_s <= max_s, got {self.min_s}, {self.max_s}")
        if self.attempts < 1:
            raise ConfigError("attempts must be >= 1")
        if self.step <= 0:
            raise ConfigError("step must be > 0")
        if self.first_batch < 0:
            raise ConfigError("first_batch must be >= 0")
        if self.closing_radius < 1:
            raise ConfigError("closing_radius must be >= 1 cell")
        if not self.area_weight > 0:
            raise ConfigError("area_weight must be > 0")
        lo, hi = self.bounding_enlargement_range
        if not 0 <= lo <= hi:
            raise ConfigError(f"invalid bounding_enlargement_range {self.bounding_enlargement_range}")
        object.__setattr__(self, "bounding_enlargement_range", (float(lo), float(hi)))

    def schedule(self) -> list[tuple[int, int]]:
        """(budget i, rectangles to place n) per iteration."""
        batches, previous = [], self.start - self.first_batch
        for i in range(self.start, self.stop + 1, self.step):
            batches.append((i, i - previous))
            previous = i
        return batches


@dataclass(frozen=True)
class TraceRow:
    index: int
    budget: int
    disparity: float
    added_cells: int
    normalized_area: float
    reward: float
    placed: int
    skipped: int

    @property
    def snapshot_id(self) -> int:
        return self.index


@dataclass
class RewardTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([row.reward for row in self.rows])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                [row.index, row.disparity, row.added_cells, row.normalized_area, row.reward]
                for row in self.rows
            ],
            columns=TRACE_COLUMNS,
        )


@dataclass
class OptimizationResult:
    optimized_mask: ShapeMask
    optimized_index: int
    trace: RewardTrace
    mode: str
    original: ShapeMask
    img_neg: ShapeMask
    snapshots: dict[int, ShapeMask] = field(default_factory=dict)

    def snapshot(self, snapshot_id: int) -> ShapeMask:
        return self.snapshots[snapshot_id]


def make_rng(seed: int) -> Generator:
    return Generator(PCG64(seed))


def _draw(rng: Generator, params: OptimizerParams, height: int, width: int) -> tuple[int, int, int, int]:
    # draw order is part of the reproducibility contract: rw, rh, x, y
    rw = int(rng.integers(params.min_s, params.max_s + 1))
    rh = int(rng.integers(params.min_s, params.max_s + 1))
    x = int(rng.integers(0, max(width - rw, 0) + 1))
    y = int(rng.integers(0, max(height - rh, 0) + 1))
    return rw, rh, x, y


def _place_rects(
    out: np.ndarray, img_neg: np.ndarray, n: int, params: OptimizerParams, rng: Generator
) -> tuple[int, int]:
    placed = skipped = 0
    height, width = out.shape
    for _ in range(n):
        for _ in range(params.attempts):
            rw, rh, x, y = _draw(rng, params, height, width)
            window = (slice(y, y + rh), slice(x, x + rw))
            # overlapping the current shape keeps the union 8-connected
            if img_neg[window].any() and out[window].any():
                out[window] = True
                placed += 1
                break
        else:
            skipped += 1
    return placed, skipped


def add_rects(
    current: ShapeMask, img_neg: ShapeMask, n: int, params: OptimizerParams, rng: Generator
) -> ShapeMask:
    """
    Place up to `n` random rectangles that overlap both the eligible region and the shape.

    Parameters
    ----------
    - current: shape to grow
    - img_neg: eligible region (hull minus original), same grid
    - n: number of rectangles
    - params: rectangle size range and attempts per rectangle
    - rng: PCG64 generator, advanced in place

    Returns
    -------
    - the grown mask; rectangles that found no valid spot within `params.attempts` are skipped
    """
    current.require_same_shape(img_neg)
    out = np.array(current.bits)
    _place_rects(out, img_neg.bits, n, params, rng)
    return current.with_bits(out)


def _remove_rects(
    out: np.ndarray, keep: np.ndarray, n: int, params: OptimizerParams, rng: Generator
) -> tuple[int, int]:
    removed = skipped = 0
    height, width = out.shape
    for _ in range(n):
        for _ in range(params.attempts):
            rw, rh, x, y = _draw(rng, params, height, width)
            window = (slice(y, y + rh), slice(x, x + rw))
            removable = out[window] & ~keep[window]
            if not removable.any():
                continue
            candidate = out.copy()
            candidate[window] &= ~removable
            if not is_connected(ShapeMask(candidate)):
                continue
            out[window] = candidate[window]
            removed += 1
            break
        else:
            skipped += 1
    return removed, skipped


def remove_rects(
    current: ShapeMask, original: ShapeMask, n: int, params: OptimizerParams, rng: Generator
) -> ShapeMask:
    """Clear up to `n` random rectangles outside `original`, keeping the mask connected."""
    current.require_same_shape(original)
    out = np.array(current.bits)
    _remove_rects(out, original.bits, n, params, rng)
    return current.with_bits(out)


def _enlarged_rectangle(original: ShapeMask, params: OptimizerParams, rng: Generator) -> tuple[ShapeMask, ShapeMask]:
    """Pad the grid as needed and return (original, filled enlarged bounding rectangle)."""
    rows, cols = np.nonzero(original.bits)
    r0, r1, c0, c1 = rows.min(), rows.max(), cols.min(), cols.max()
    extent_x, extent_y = c1 - c0 + 1, r1 - r0 + 1
    lo, hi = params.bounding_enlargement_range
    left, right, bottom, top = (
        math.ceil(rng.uniform(lo, hi) * extent)
        for extent in (extent_x, extent_x, extent_y, extent_y)
    )
    pad_left = max(0, left - c0)
    pad_right = max(0, c1 + right - (original.width - 1))
    pad_bottom = max(0, bottom - r0)
    pad_top = max(0, r1 + top - (original.height - 1))
    bits = np.pad(original.bits, ((pad_bottom, pad_top), (pad_left, pad_right)))
    origin = (
        original.origin[0] - pad_left * original.resolution,
        original.origin[1] - pad_bottom * original.resolution,
    )
    padded = ShapeMask(bits, original.resolution, origin)
    r0, r1, c0, c1 = r0 + pad_bottom, r1 + pad_bottom, c0 + pad_left, c1 + pad_left
    rectangle = np.zeros_like(bits)
    rectangle[r0 - bottom : r1 + top + 1, c0 - left : c1 + right + 1] = True
    return padded, padded.with_bits(rectangle)


def _score(result: ShapeMask, original: ShapeMask, img_neg: ShapeMask, capacity: int, area_weight: float):
    disparity = procrustes_disparity(result, original)
    area = added_area(result, img_neg)
    normalized = area / capacity if capacity else 0.0
    return disparity, area, normalized, disparity - area_weight * normalized


def optimize_obfuscation(original: ShapeMask, params: OptimizerParams = OptimizerParams()) -> OptimizationResult:
    """
    Search for a cheap obfuscation shape around `original`.

    Concave shapes grow by random rectangles inside their convex hull; shapes that are nearly
    their own hull start from an enlarged bounding rectangle and shrink by random removals.
    Every iteration is scored with R = D − λ·Â, where D is the Procrustes disparity to the
    original and Â the added area normalised by the eligible region.

    Parameters
    ----------
    - original: non-empty, 8-connected mask of the part
    - params: search parameters

    Returns
    -------
    - the argmax-reward snapshot with the full trace
    """
    if original.count == 0:
        raise OptimizationError("original mask is empty")
    if not is_connected(original):
        raise OptimizationError("original mask is not connected")
    schedule = params.schedule()
    if not schedule:
        raise OptimizationError(
            f"schedule start={params.start} stop={params.stop} step={params.step} has no iterations"
        )

    rng = make_rng(params.seed)
    hull = convex_hull_mask(original)
    convex = hull.count / original.count < params.convexity_ratio_threshold
    mode = CONVEX_REMOVE if convex else CONCAVE_ADD
    if convex:
        original, result = _enlarged_rectangle(original, params, rng)
        img_neg = result - original
    else:
        result = original
        img_neg = hull - original
    capacity = img_neg.count
    logger.info(
        f"optimizing obfuscation in {mode} mode: {original.count} original cells, "
        f"{capacity} eligible cells"
    )

    trace = RewardTrace()
    snapshots: dict[int, ShapeMask] = {}
    for budget, n in schedule:
        bits = np.array(result.bits)
        if convex:
            changed, skipped = _remove_rects(bits, original.bits, n, params, rng)
            result = result.with_bits(bits)
        else:
            changed, skipped = _place_rects(bits, img_neg.bits, n, params, rng)
            result = binary_closing(result.with_bits(bits), params.closing_radius)
            if result.count > hull.count:
                logger.debug(f"stopping at budget {budget}: shape exceeds its hull area")
                break
        if changed == 0 and trace.rows:
            logger.debug(f"stopping at budget {budget}: no rectangle could be placed")
            break
        disparity, area, normalized, reward = _score(result, original, img_neg, capacity, params.area_weight)
        index = len(trace)
        trace.rows.append(TraceRow(index, budget, disparity, area, normalized, reward, changed, skipped))
        snapshots[index] = result
        logger.debug(
            f"iteration {index} (budget {budget}): D={disparity:.5f} A={area} R={reward:.5f} "
            f"placed={changed} skipped={skipped}"
        )
        if convex and added_area(result, img_neg) == 0:
            break

    if not trace.rows:
        raise OptimizationError("the schedule recorded no iteration")
    optimized_index = int(np.argmax(trace.rewards))
    logger.info(
        f"selected iteration {optimized_index} of {len(trace)} "
        f"(reward {trace.rows[optimized_index].reward:.5f})"
    )
    return OptimizationResult(
        snapshots[optimized_index], optimized_index, trace, mode, original, img_neg, snapshots
    )


def mask_to_boundary(
    result: OptimizationResult, simplify_tolerance: float = 0.5, toolpath: Toolpath | None = None
) -> PolyBoundary:
    """
    Boundary polygon of the optimized shape.

    The mask is dilated by one cell first so the polygon through boundary cell centers encloses
    every foreground cell. When `toolpath` is given, its extruding vertices are checked.
    """
    polygon = extract_boundary_polygon(dilate(result.optimized_mask, 1), simplify_tolerance)
    boundary = PolyBoundary(polygon)
    if toolpath is not None:
        for segment in toolpath.extruding():
            for point in (segment.start, segment.end):
                if not boundary.covers((point.x, point.y)):
                    raise BoundaryEscapeError(
                        f"toolpath escapes boundary at ({point.x:.3f}, {point.y:.3f}); "
                        "use a smaller simplify tolerance or a finer resolution"
                    )
    return boundary


def save_trace(trace: RewardTrace, path: Path) -> None:
    trace.to_frame().to_csv(path, index=False, lineterminator="\n")


def load_trace(path: Path) -> pd.DataFrame:
    return pd.read_csv(path)


def save_snapshots(result: OptimizationResult, directory: Path) -> list[Path]:
    """One PGM (plus JSON sidecar) per recorded iteration, named `snapshot_<id>.pgm`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for snapshot_id, mask in sorted(result.snapshots.items()):
        path = directory / f"snapshot_{snapshot_id:04d}.pgm"
        save_mask(mask, path)
        paths.append(path)
    return paths
