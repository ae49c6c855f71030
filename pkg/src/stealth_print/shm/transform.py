import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import loguru
import pandas as pd

from stealth_print.errors import ConfigError, ToolpathError
from stealth_print.gcode import (
    Command,
    GCodeProgram,
    MachineState,
    Move,
    Point3,
    Segment,
    Toolpath,
    print_time,
)
from stealth_print.gcode.toolpath import DEFAULT_FEEDRATE
from stealth_print.geometry import Point2
from stealth_print.shm.boundary import Boundary, PolyBoundary, RectBoundary, check_containment, extension_point

logger = loguru.logger

SEGMENT_FILTERS = ("extruding_only", "all_moves")


@dataclass(frozen=True)
class ShmConfig:
    """
    Parameters of the boundary extension rewrite.

    Attributes
    ----------
    - margin: mm added around each layer's bounding box in rectangle mode
    - min_extension: extensions shorter than this (mm) are skipped
    - segment_filter: "extruding_only" or "all_moves"
    - extension_feedrate: None to inherit the extended segment's feedrate, else a fixed mm/min
    - extend_start: also extend each selected segment backward from its start
    """

    margin: float = 2.0
    min_extension: float = 1.0
    segment_filter: str = "extruding_only"
    extension_feedrate: float | None = None
    extend_start: bool = False

    def __post_init__(self):
        if self.margin < 0:
            raise ConfigError(f"margin must be >= 0 mm, got {self.margin}")
        if self.min_extension < 0:
            raise ConfigError(f"min_extension must be >= 0 mm, got {self.min_extension}")
        if self.segment_filter not in SEGMENT_FILTERS:
            raise ConfigError(f"segment_filter must be one of {SEGMENT_FILTERS}")
        if self.extension_feedrate is not None and not self.extension_feedrate > 0:
            raise ConfigError("extension_feedrate must be > 0 mm/min")


@dataclass(frozen=True)
class Extension:
    """
    One inserted out-and-back excursion.

    `endpoint` is where the head leaves the original path and comes back to; `side` is "end"
    for an excursion after the segment and "start" for one inserted before it.
    """

    command_index: int
    layer: int
    endpoint: Point2
    point: Point2
    side: str = "end"

    @property
    def length(self) -> float:
        return math.dist(self.endpoint, self.point)


@dataclass
class ShmResult:
    program: GCodeProgram
    extensions: list[Extension] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def added_length(self) -> float:
        """XY path length added by the excursions, in mm."""
        return math.fsum(2.0 * extension.length for extension in self.extensions)


def _boundary_for(boundaries: Boundary | Mapping[int, Boundary], layer: int) -> Boundary | None:
    if isinstance(boundaries, (RectBoundary, PolyBoundary)):
        return boundaries
    return boundaries.get(layer)


def _reversed(segment: Segment) -> Segment:
    return Segment(segment.end, segment.start, segment.feedrate, layer=segment.layer)


def _excursion(point: Point2, anchor: Point2, f: float | None, restore: float | None) -> list[Move]:
    moves = [Move("G1", x=point[0], y=point[1], f=f), Move("G1", x=anchor[0], y=anchor[1])]
    if restore is not None:
        moves.append(Move("G1", f=restore))
    return moves


def apply_shm(
    program: GCodeProgram,
    boundary: Boundary | Mapping[int, Boundary],
    config: ShmConfig = ShmConfig(),
    position: Point3 | None = None,
    feedrate: float = DEFAULT_FEEDRATE,
) -> ShmResult:
    """
    Extend every selected motion to the boundary and come back.

    After each selected segment with a valid extension point Q, a non-extruding move to Q and
    a move back to the segment's end are inserted. With `config.extend_start` the same is done
    backward from the segment's start, before the segment. Original commands are kept verbatim.

    Parameters
    ----------
    - program: program to rewrite
    - boundary: one boundary for every layer, or a mapping layer index -> boundary
    - config: extension parameters
    - position, feedrate: interpreter defaults, as for `to_toolpath`

    Returns
    -------
    - the rewritten program with the list of inserted excursions and warnings
    """
    state = MachineState(position, feedrate)
    commands: list[Command] = []
    line_numbers: list[int | None] = []
    extensions: list[Extension] = []
    warnings: list[str] = []
    motion_count = 0
    missing_layers: set[int] = set()
    fixed = config.extension_feedrate

    for index, (command, line_number) in enumerate(zip(program.commands, program.source_line_numbers)):
        modal = state.feedrate
        before: list[Move] = []
        after: list[Move] = []
        for segment in state.execute(command, index):
            motion_count += 1
            if config.segment_filter == "extruding_only" and not segment.extruding:
                continue
            if segment.xy_length == 0:
                continue
            layer_boundary = _boundary_for(boundary, segment.layer)
            if layer_boundary is None:
                missing_layers.add(segment.layer)
                continue
            check_containment([segment], layer_boundary)

            if config.extend_start:
                point = extension_point(_reversed(segment), layer_boundary, config.min_extension)
                if point is not None:
                    start = (segment.start.x, segment.start.y)
                    extensions.append(Extension(index, segment.layer, start, point, "start"))
                    if fixed is not None:
                        before += _excursion(point, start, fixed, modal)
                    else:
                        # the segment's own F word has not been executed yet
                        f = segment.feedrate if segment.feedrate != modal else None
                        before += _excursion(point, start, f, None)

            point = extension_point(segment, layer_boundary, config.min_extension)
            if point is not None:
                end = (segment.end.x, segment.end.y)
                extensions.append(Extension(index, segment.layer, end, point))
                after += _excursion(point, end, fixed, state.feedrate if fixed is not None else None)

        commands += before
        line_numbers += [None] * len(before)
        commands.append(command)
        line_numbers.append(line_number)
        commands += after
        line_numbers += [None] * len(after)

    for layer in sorted(missing_layers):
        warnings.append(f"no boundary for layer {layer}; its segments were not extended")
    if motion_count == 0:
        warnings.append("program has no motion segments; returned unchanged")
    for warning in warnings:
        logger.warning(warning)

    logger.info(f"inserted {len(extensions)} boundary excursions into {len(program)} commands")
    return ShmResult(GCodeProgram(tuple(commands), tuple(line_numbers)), extensions, warnings)


def added_path_length(original: Toolpath, obfuscated: Toolpath) -> float:
    """XY path length difference in mm."""
    return obfuscated.length(xy=True) - original.length(xy=True)


def overhead_report(original: Toolpath, obfuscated: Toolpath, feedrates: Sequence[float]) -> pd.DataFrame:
    """
    Print-time overhead at uniform feedrates.

    Parameters
    ----------
    - original, obfuscated: toolpaths to compare
    - feedrates: mm/min values; every segment of both toolpaths is timed at each value

    Returns
    -------
    - DataFrame with columns feedrate, t_orig_s, t_obf_s, added_s, percent
    """
    rows = []
    for feedrate in feedrates:
        if not feedrate > 0:
            raise ToolpathError(f"feedrates must be > 0 mm/min, got {feedrate}")
        t_orig = print_time(original.with_feedrate(feedrate))
        t_obf = print_time(obfuscated.with_feedrate(feedrate))
        added = t_obf - t_orig
        rows.append(
            {
                "feedrate": float(feedrate),
                "t_orig_s": t_orig,
                "t_obf_s": t_obf,
                "added_s": added,
                "percent": 100.0 * added / t_orig if t_orig > 0 else 0.0,
            }
        )
    return pd.DataFrame(rows, columns=["feedrate", "t_orig_s", "t_obf_s", "added_s", "percent"])
