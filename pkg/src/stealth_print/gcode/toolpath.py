import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import loguru
import numpy as np

from stealth_print.errors import ToolpathError, UnsupportedCommandError
from stealth_print.gcode.command import (
    AXES,
    Command,
    Dwell,
    GCodeProgram,
    Home,
    Move,
    Passthrough,
    SetPosition,
)

logger = loguru.logger

CHAIN_TOLERANCE = 1e-9
DEFAULT_FEEDRATE = 1500.0

# Commands whose meaning the constant-velocity absolute-mode model cannot represent.
UNSUPPORTED_CODES = {
    "G2": "arc moves",
    "G3": "arc moves",
    "G20": "inch units",
    "G91": "relative positioning",
    "M83": "relative extrusion",
}


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Segment:
    """
    One straight nozzle motion at constant velocity.

    Attributes
    ----------
    - start, end: machine coordinates in mm
    - feedrate: mm/min, strictly positive
    - extruding: True when filament is deposited along the segment
    - layer: layer index, non-decreasing along a toolpath
    - e_delta: extruder advance in mm (negative for retractions)
    - dwell: pause in seconds spent at `end` after the motion
    - command_index: index of the program command that produced the segment
    """

    start: Point3
    end: Point3
    feedrate: float
    extruding: bool = False
    layer: int = 0
    e_delta: float = 0.0
    dwell: float = 0.0
    command_index: int | None = None

    def __post_init__(self):
        if not self.feedrate > 0:
            raise ToolpathError(f"feedrate must be > 0 mm/min, got {self.feedrate}")
        if self.dwell < 0:
            raise ToolpathError(f"dwell must be >= 0 s, got {self.dwell}")

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    @property
    def xy_length(self) -> float:
        return math.dist(self.start[:2], self.end[:2])

    @property
    def duration(self) -> float:
        """Seconds: motion time at constant feedrate plus dwell."""
        return 60.0 * self.length / self.feedrate + self.dwell

    @property
    def direction_xy(self) -> tuple[float, float] | None:
        """Unit XY direction, None for segments without XY travel."""
        length = self.xy_length
        if length == 0:
            return None
        return ((self.end.x - self.start.x) / length, (self.end.y - self.start.y) / length)


@dataclass(frozen=True)
class Toolpath:
    """Chained segments starting at `initial_position`."""

    segments: tuple[Segment, ...] = ()
    initial_position: Point3 = field(default=Point3(0.0, 0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "initial_position", Point3(*self.initial_position))
        previous = self.initial_position
        for k, segment in enumerate(self.segments):
            if math.dist(segment.start, previous) > CHAIN_TOLERANCE:
                raise ToolpathError(f"segment {k} does not start where segment {k - 1} ends")
            previous = segment.end

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __add__(self, other: "Toolpath") -> "Toolpath":
        if other.segments and math.dist(other.initial_position, self.end_position) > CHAIN_TOLERANCE:
            raise ToolpathError("toolpaths are not chained")
        return Toolpath(self.segments + other.segments, self.initial_position)

    @property
    def end_position(self) -> Point3:
        return self.segments[-1].end if self.segments else self.initial_position

    @property
    def duration(self) -> float:
        return print_time(self)

    def length(self, xy: bool = False) -> float:
        """Total path length in mm, in 3D or projected on XY."""
        return math.fsum(s.xy_length if xy else s.length for s in self.segments)

    def layers(self) -> list[int]:
        return sorted({segment.layer for segment in self.segments})

    def layer(self, index: int) -> list[Segment]:
        return [segment for segment in self.segments if segment.layer == index]

    def extruding(self) -> list[Segment]:
        return [segment for segment in self.segments if segment.extruding]

    def with_feedrate(self, feedrate: float) -> "Toolpath":
        """Same geometry with every feedrate overridden."""
        return Toolpath(
            tuple(replace(segment, feedrate=feedrate) for segment in self.segments),
            self.initial_position,
        )

    def vertices(self) -> np.ndarray:
        """(n + 1, 3) array: initial position followed by every segment end."""
        points = [self.initial_position] + [segment.end for segment in self.segments]
        return np.asarray(points, dtype=float)

    def bounds(self, extruding_only: bool = False) -> tuple[tuple[float, float], tuple[float, float]]:
        """XY bounding box ((xmin, ymin), (xmax, ymax)) of the selected segments."""
        segments = self.extruding() if extruding_only else list(self.segments)
        if not segments:
            raise ToolpathError("no segments to bound")
        points = np.array([p[:2] for s in segments for p in (s.start, s.end)])
        low, high = points.min(axis=0), points.max(axis=0)
        return (float(low[0]), float(low[1])), (float(high[0]), float(high[1]))


class MachineState:
    """
    Modal interpreter state: position, feedrate, extruder position and layer.

    Commands are fed one at a time through `execute`, which returns the segments the command
    produced. Positioning is absolute; extrusion is absolute.
    """

    def __init__(self, position: Point3 | None = None, feedrate: float = DEFAULT_FEEDRATE):
        if not feedrate > 0:
            raise ToolpathError(f"default feedrate must be > 0 mm/min, got {feedrate}")
        self.axes: list[float | None] = list(position) if position is not None else [None] * 3
        self.feedrate = feedrate
        self.e = 0.0
        self.layer = 0
        self.max_z = self.axes[2]
        self.initial_position = self.position

    @property
    def position(self) -> Point3 | None:
        if any(value is None for value in self.axes):
            return None
        return Point3(*self.axes)  # type: ignore[arg-type]

    def _move_to(self, target: list[float]) -> tuple[Point3 | None, Point3]:
        start = self.position
        z = target[2]
        if self.max_z is None:
            self.max_z = z
        elif z > self.max_z + CHAIN_TOLERANCE:
            self.max_z = z
            self.layer += 1
        self.axes = list(target)
        end = Point3(*target)
        if self.initial_position is None:
            self.initial_position = end
        return start, end

    def execute(self, command: Command, index: int | None = None) -> list[Segment]:
        """
        Apply one command to the state.

        Parameters
        ----------
        - command: the command to interpret
        - index: command index recorded on the produced segments

        Returns
        -------
        - the segments the command produced (possibly none)
        """
        if isinstance(command, Move):
            return self._execute_move(command, index)
        if isinstance(command, Home):
            axes = command.axes or AXES
            target = [0.0 if axis in axes else value for axis, value in zip(AXES, self.axes)]
            if any(value is None for value in target):
                self.axes = target
                return []
            start, end = self._move_to(target)  # type: ignore[arg-type]
            if start is None:
                return []
            return [Segment(start, end, self.feedrate, layer=self.layer, command_index=index)]
        if isinstance(command, Dwell):
            position = self.position
            if position is None:
                logger.warning(f"dwell at command {index} ignored: position unknown")
                return []
            return [
                Segment(
                    position,
                    position,
                    self.feedrate,
                    layer=self.layer,
                    dwell=command.seconds,
                    command_index=index,
                )
            ]
        if isinstance(command, SetPosition):
            if command.x is not None or command.y is not None or command.z is not None:
                raise UnsupportedCommandError("G92 on X/Y/Z is not supported")
            if command.e is not None:
                self.e = command.e
            return []
        if isinstance(command, Passthrough) and command.code in UNSUPPORTED_CODES:
            raise UnsupportedCommandError(
                f"{command.code} ({UNSUPPORTED_CODES[command.code]}) is not supported: {command.raw!r}"
            )
        return []

    def _execute_move(self, move: Move, index: int | None) -> list[Segment]:
        if move.f is not None:
            if not move.f > 0:
                raise ToolpathError(f"non-positive feedrate F{move.f} at command {index}")
            self.feedrate = move.f
        e_delta = 0.0
        if move.e is not None:
            e_delta = move.e - self.e
            self.e = move.e
        if not move.has_xyz and move.e is None:
            return []
        if not move.has_xyz and self.position is None:
            logger.debug(f"extruder-only move at command {index} before any position; E is now {self.e}")
            return []
        target = [
            word if word is not None else current
            for word, current in zip((move.x, move.y, move.z), self.axes)
        ]
        if any(value is None for value in target):
            raise ToolpathError(f"unknown start position at command {index}")
        start, end = self._move_to(target)  # type: ignore[arg-type]
        if start is None:
            return []
        return [
            Segment(
                start,
                end,
                self.feedrate,
                extruding=move.kind == "G1" and e_delta > 0,
                layer=self.layer,
                e_delta=e_delta,
                command_index=index,
            )
        ]


def to_toolpath(
    program: GCodeProgram,
    position: Point3 | None = None,
    feedrate: float = DEFAULT_FEEDRATE,
) -> Toolpath:
    """
    Interpret a program kinematically.

    Parameters
    ----------
    - program: parsed program
    - position: nozzle position before the first command, None when unknown
    - feedrate: modal feedrate in mm/min until the program sets one

    Returns
    -------
    - the chained toolpath; its initial position is the first known position
    """
    state = MachineState(position, feedrate)
    segments: list[Segment] = []
    for index, command in enumerate(program.commands):
        segments.extend(state.execute(command, index))
    initial = state.initial_position or Point3(0.0, 0.0, 0.0)
    toolpath = Toolpath(tuple(segments), initial)
    logger.debug(f"interpreted {len(program)} commands into {len(toolpath)} segments")
    return toolpath


def print_time(toolpath: Toolpath) -> float:
    """Seconds to run the toolpath under the constant-velocity model."""
    return math.fsum(segment.duration for segment in toolpath.segments)
