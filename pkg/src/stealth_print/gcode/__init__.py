from .command import (
    Command,
    Comment,
    Dwell,
    FanSpeed,
    GCodeProgram,
    Home,
    HotendTemp,
    Move,
    Passthrough,
    SetPosition,
    WaitMoves,
    emit_command,
    emit_gcode,
    parse_gcode,
    parse_line,
    read_gcode,
    write_gcode,
)
from .toolpath import MachineState, Point3, Segment, Toolpath, print_time, to_toolpath

__all__ = [
    "Command",
    "Comment",
    "Dwell",
    "FanSpeed",
    "GCodeProgram",
    "Home",
    "HotendTemp",
    "MachineState",
    "Move",
    "Passthrough",
    "Point3",
    "Segment",
    "SetPosition",
    "Toolpath",
    "WaitMoves",
    "emit_command",
    "emit_gcode",
    "parse_gcode",
    "parse_line",
    "print_time",
    "read_gcode",
    "to_toolpath",
    "write_gcode",
]
