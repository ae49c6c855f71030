from .mask import (
    ShapeMask,
    draw_lines,
    fill_polygon,
    load_mask,
    polyline_lines,
    rasterize,
    rasterize_lines,
    rect_mask,
    regrid,
    save_mask,
)
from .morphology import (
    added_area,
    binary_closing,
    binary_fill,
    component_count,
    convex_hull_mask,
    dilate,
    extract_boundary_polygon,
    footprint,
    is_connected,
    trace_contour,
)
from .procrustes import procrustes_disparity
from .shapes import Point2, Polygon, Rect, load_polygon, save_polygon

__all__ = [
    "Point2",
    "Polygon",
    "Rect",
    "ShapeMask",
    "added_area",
    "binary_closing",
    "binary_fill",
    "component_count",
    "convex_hull_mask",
    "dilate",
    "draw_lines",
    "extract_boundary_polygon",
    "fill_polygon",
    "footprint",
    "is_connected",
    "load_mask",
    "load_polygon",
    "polyline_lines",
    "procrustes_disparity",
    "rasterize",
    "rasterize_lines",
    "rect_mask",
    "regrid",
    "save_mask",
    "save_polygon",
    "trace_contour",
]
