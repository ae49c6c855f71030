from .specimens import (
    hold_pattern_gcode,
    key_gcode,
    key_mask,
    load_specimens,
    sweep_gcode,
    triangle_gcode,
    triangle_widths,
    zigzag_gcode,
)

__all__ = [
    "hold_pattern_gcode",
    "key_gcode",
    "key_mask",
    "load_specimens",
    "sweep_gcode",
    "triangle_gcode",
    "triangle_widths",
    "zigzag_gcode",
]
