import json
import math
from functools import cache

from stealth_print import ROOT
from stealth_print.gcode import (
    Comment,
    Dwell,
    FanSpeed,
    GCodeProgram,
    Home,
    HotendTemp,
    Move,
    SetPosition,
)
from stealth_print.geometry import Rect, ShapeMask, rect_mask

EXTRUSION_PER_MM = 0.0332


@cache
def load_specimens() -> dict:
    with open(ROOT / "data" / "specimens.json") as f:
        return json.load(f)


class _ProgramBuilder:
    """Accumulates commands while tracking the head position and absolute E."""

    def __init__(self):
        self.commands: list = []
        self.x = 0.0
        self.y = 0.0
        self.e = 0.0

    def add(self, command) -> None:
        self.commands.append(command)

    def travel(self, x: float | None = None, y: float | None = None, f: float | None = None) -> None:
        x = self.x if x is None else x
        y = self.y if y is None else y
        if (x, y) == (self.x, self.y) and f is None:
            return
        self.add(Move("G0", x=x if x != self.x else None, y=y if y != self.y else None, f=f))
        self.x, self.y = x, y

    def extrude(self, x: float, y: float) -> None:
        self.e = round(self.e + EXTRUSION_PER_MM * math.dist((self.x, self.y), (x, y)), 5)
        self.add(Move("G1", x=x if x != self.x else None, y=y if y != self.y else None, e=self.e))
        self.x, self.y = x, y

    def start(self, feedrate: float, z: float) -> None:
        self.add(Home())
        self.add(HotendTemp(205.0, wait=True))
        self.add(SetPosition(e=0.0))
        self.add(FanSpeed(100.0))
        self.add(Move("G0", z=z, f=feedrate))

    def finish(self) -> GCodeProgram:
        self.add(FanSpeed(0.0))
        self.travel(0.0, 0.0)
        return GCodeProgram(tuple(self.commands))


def _key_rects() -> list[Rect]:
    key = load_specimens()["key"]
    ox, oy = key["origin_mm"]
    return [Rect((x0 + ox, y0 + oy), (x1 + ox, y1 + oy)) for x0, y0, x1, y1 in key["rects_mm"]]


def key_mask(resolution: float = 0.5, padding: float = 2.0) -> ShapeMask:
    """Raster of the key-like concave specimen: a ring bow, a shaft and four teeth."""
    rects = _key_rects()
    grid = ShapeMask.covering(
        min(r.min[0] for r in rects),
        min(r.min[1] for r in rects),
        max(r.max[0] for r in rects),
        max(r.max[1] for r in rects),
        resolution,
        padding,
    )
    bits = grid.bits.copy()
    for rect in rects:
        bits |= rect_mask(rect, grid).bits
    return grid.with_bits(bits)


def key_gcode(layers: int = 3) -> GCodeProgram:
    """Key specimen, every rectangle hatched along X in a zigzag, `layers` identical layers."""
    key = load_specimens()["key"]
    spacing = key["hatch_spacing_mm"]
    feedrate = key["feedrate_mm_min"]
    builder = _ProgramBuilder()
    builder.start(feedrate, key["layer_height_mm"])
    for layer in range(layers):
        if layer:
            builder.add(Move("G0", z=round((layer + 1) * key["layer_height_mm"], 3)))
        builder.add(Comment(f";LAYER:{layer}"))
        for rect in _key_rects():
            rows = round(rect.height / spacing)
            for k in range(rows):
                y = round(rect.min[1] + spacing * (k + 0.5), 3)
                x_from, x_to = (rect.min[0], rect.max[0]) if k % 2 == 0 else (rect.max[0], rect.min[0])
                builder.travel(x_from, y)
                builder.extrude(x_to, y)
    return builder.finish()


def triangle_widths(base: float, rows: int) -> list[float]:
    """Row widths sampled at row mid-height, so the rows cover exactly half the bounding box."""
    return [base * (1.0 - (i + 0.5) / rows) for i in range(rows)]


def triangle_gcode(
    base: float | None = None,
    rows: int | None = None,
    y_step: float | None = None,
    feedrate: float | None = None,
    origin: tuple[float, float] | None = None,
    z: float = 0.2,
) -> GCodeProgram:
    """
    Right triangle printed as a zigzag raster, vertical edge on the left.

    Rows alternate direction. A row change is a travel step along Y followed by a travel along X
    to the start of the next row (empty on the vertical edge). The head parks at the origin.

    Parameters
    ----------
    - base: width of the bottom row's bounding box in mm
    - rows: number of raster rows
    - y_step: distance between rows in mm
    - feedrate: mm/min for every move
    - origin: lower-left corner in mm
    - z: layer height in mm
    """
    spec = load_specimens()["triangle"]
    base = spec["base_mm"] if base is None else base
    rows = spec["rows"] if rows is None else rows
    y_step = spec["y_step_mm"] if y_step is None else y_step
    feedrate = spec["feedrate_mm_min"] if feedrate is None else feedrate
    x0, y0 = spec["origin_mm"] if origin is None else origin

    builder = _ProgramBuilder()
    builder.start(feedrate, z)
    builder.travel(x0, y0)
    for i, width in enumerate(triangle_widths(base, rows)):
        row_start, row_end = (x0, x0 + width) if i % 2 == 0 else (x0 + width, x0)
        if i:
            builder.travel(y=y0 + i * y_step)
            builder.travel(x=row_start)
        builder.extrude(row_end, builder.y)
    return builder.finish()


def sweep_gcode(x0: float | None = None, x1: float | None = None, feedrate: float | None = None) -> GCodeProgram:
    """A single X sweep; the first move only establishes the start position."""
    spec = load_specimens()["sweep"]
    x0 = spec["x0_mm"] if x0 is None else x0
    x1 = spec["x1_mm"] if x1 is None else x1
    feedrate = spec["feedrate_mm_min"] if feedrate is None else feedrate
    return GCodeProgram((Move("G0", x=x0, y=0.0, z=0.0, f=feedrate), Move("G1", x=x1)))


def hold_pattern_gcode() -> GCodeProgram:
    """Localization script: visit each X waypoint along the row and hold there."""
    spec = load_specimens()["hold_pattern"]
    commands: list = [Home()]
    for k, x in enumerate(spec["waypoints_mm"]):
        commands.append(Move("G1", x=x, f=spec["feedrate_mm_min"] if k == 0 else None))
        commands.append(Dwell(spec["initial_hold_s"] if k == 0 else spec["pause_s"]))
    return GCodeProgram(tuple(commands))


def zigzag_gcode(reversals: int = 5, length: float = 20.0, feedrate: float = 1200.0) -> GCodeProgram:
    """Back-and-forth moves along X with exactly `reversals` direction reversals."""
    commands: list = [Move("G0", x=0.0, y=0.0, z=0.2, f=feedrate)]
    for k in range(reversals + 1):
        commands.append(Move("G1", x=length if k % 2 == 0 else 0.0))
    return GCodeProgram(tuple(commands))
