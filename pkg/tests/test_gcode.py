import pytest

from stealth_print.errors import GCodeParseError, ToolpathError, UnsupportedCommandError
from stealth_print.gcode import (
    Comment,
    Dwell,
    FanSpeed,
    GCodeProgram,
    Home,
    HotendTemp,
    Move,
    Passthrough,
    Point3,
    Segment,
    SetPosition,
    Toolpath,
    WaitMoves,
    emit_gcode,
    parse_gcode,
    print_time,
    read_gcode,
    to_toolpath,
    write_gcode,
)

ORIGIN = Point3(0.0, 0.0, 0.0)


def test_parse_move():
    program = parse_gcode("G1 X1.0 Y3.3")
    assert program.commands == (Move("G1", x=1.0, y=3.3),)


def test_parse_absent_words_stay_unset():
    (move,) = parse_gcode("G0 Z0.2").commands
    assert move.x is None and move.y is None and move.z == 0.2


def test_parse_fan_speed():
    assert parse_gcode("M106 S50").commands == (FanSpeed(50.0),)


def test_parse_comments_and_empty_lines():
    program = parse_gcode("\n; hello\n")
    assert program.commands == (Comment(""), Comment("; hello"))


def test_parse_table_of_commands():
    text = "\n".join(
        [
            "G28 X Y",
            "G28",
            "M104 S210",
            "M109 S215",
            "M107",
            "M400",
            "G4 P500",
            "G4 S2",
            "G92 E0",
            "G1X10Y5",
            "g01 x1 f600",
            "T0",
        ]
    )
    assert parse_gcode(text).commands == (
        Home(("X", "Y")),
        Home(),
        HotendTemp(210.0),
        HotendTemp(215.0, wait=True),
        FanSpeed(0.0),
        WaitMoves(),
        Dwell(0.5),
        Dwell(2.0),
        SetPosition(e=0.0),
        Move("G1", x=10.0, y=5.0),
        Move("G1", x=1.0, f=600.0),
        Passthrough("T0"),
    )


def test_parse_inline_comment():
    (move,) = parse_gcode("G1 X1 ; outer wall").commands
    assert move == Move("G1", x=1.0, comment=" outer wall")


def test_parse_crlf():
    program = parse_gcode("G1 X1\r\nG1 X2\r\n")
    assert [m.x for m in program.moves] == [1.0, 2.0]


@pytest.mark.parametrize("line", ["G1 Xabc", "G1 X", "G0 X1 Y--2", "M106 S1.2.3"])
def test_parse_malformed_number_reports_line(line):
    with pytest.raises(GCodeParseError) as excinfo:
        parse_gcode(f"G28\n{line}\n")
    assert excinfo.value.line_number == 2
    assert excinfo.value.line == line


def test_parse_fan_out_of_range():
    with pytest.raises(GCodeParseError):
        parse_gcode("M106 S255")


def test_unknown_commands_pass_through_verbatim():
    text = "M201 X500 Y500 ;accel\nG1 X1 A3\nG28.1\n"
    program = parse_gcode(text)
    assert all(isinstance(c, Passthrough) for c in program.commands)
    assert emit_gcode(program) == text


def test_emit_canonical_form():
    program = GCodeProgram((Move("G1", x=1.0, y=3.3), Comment("; layer 2")))
    assert emit_gcode(program) == "G1 X1.000 Y3.300\n; layer 2\n"


def test_emit_word_order():
    program = parse_gcode("G1 F1200 E0.5 Y2 X1")
    assert emit_gcode(program) == "G1 X1.000 Y2.000 E0.500 F1200.000\n"


def test_emit_keeps_extra_precision():
    program = GCodeProgram((Move("G1", e=0.03327),))
    assert emit_gcode(program) == "G1 E0.03327\n"
    assert emit_gcode(program, decimals=1) == "G1 E0.03327\n"


def test_round_trip_three_commands():
    program = GCodeProgram((Home(), Move("G1", x=10.0, f=500.0), FanSpeed(50.0)))
    assert parse_gcode(emit_gcode(program)).commands == program.commands


def test_round_trip_fixpoint_on_corpus(gcode_corpus):
    parsed = parse_gcode(gcode_corpus)
    again = parse_gcode(emit_gcode(parsed))
    assert again.commands == parsed.commands
    assert parse_gcode(emit_gcode(again)) == again


def test_read_write_gcode(tmp_path):
    program = parse_gcode("G28\nG1 X10 Y10 F600 ; go\n")
    path = tmp_path / "out.gcode"
    write_gcode(program, path)
    assert path.read_bytes() == b"G28\nG1 X10.000 Y10.000 F600.000 ; go\n"
    assert read_gcode(path).commands == program.commands


def test_toolpath_single_move():
    toolpath = to_toolpath(GCodeProgram((Move("G1", x=10.0),)), ORIGIN, 500.0)
    (segment,) = toolpath.segments
    assert segment.start == ORIGIN
    assert segment.end == Point3(10.0, 0.0, 0.0)
    assert segment.feedrate == 500.0
    assert segment.duration == pytest.approx(1.2)


def test_toolpath_zero_length_move():
    program = GCodeProgram((Move("G1", x=5.0), Move("G1", x=5.0)))
    toolpath = to_toolpath(program, ORIGIN, 500.0)
    assert toolpath.segments[1].length == 0.0
    assert toolpath.segments[1].duration == 0.0


def test_toolpath_sweep_duration():
    program = parse_gcode("G1 X0 F500\nG1 X180\n")
    assert print_time(to_toolpath(program, ORIGIN)) == pytest.approx(21.6)


def test_toolpath_extrusion_flags():
    program = parse_gcode(
        "G28\nG92 E0\nG1 X10 E1 F600\nG1 X10 Y10 E0.5\nG0 X0 E0.6\nG1 X5 E1.5\nG1 X6\n"
    )
    flags = [s.extruding for s in to_toolpath(program)]
    # print, retract, G0 with E, print, move without E
    assert flags == [True, False, False, True, False]
    assert to_toolpath(program).segments[1].e_delta == pytest.approx(-0.5)


def test_toolpath_layers_increase_with_z():
    program = parse_gcode(
        "G28\nG1 Z0.2 F600\nG1 X5 E1\nG1 Z0.6\nG1 Z0.4\nG1 X0 E2\nG1 Z0.6\nG1 Z0.8\n"
    )
    layers = [s.layer for s in to_toolpath(program)]
    assert layers == [1, 1, 2, 2, 2, 2, 3]
    assert layers == sorted(layers)


def test_toolpath_unknown_start_position():
    with pytest.raises(ToolpathError, match="unknown start position"):
        to_toolpath(parse_gcode("G1 X10\n"))


def test_retraction_before_homing_needs_no_position():
    toolpath = to_toolpath(parse_gcode("G1 E-2 F1800\nG28\nG1 X10 E1\n"))
    moving = [segment for segment in toolpath if segment.xy_length > 0]
    assert len(moving) == 1
    assert moving[0].e_delta == pytest.approx(3.0)
    assert moving[0].extruding


def test_toolpath_full_xyz_establishes_position():
    toolpath = to_toolpath(parse_gcode("G1 X1 Y2 Z3\nG1 X4\n"))
    assert toolpath.initial_position == Point3(1.0, 2.0, 3.0)
    assert len(toolpath) == 1


def test_toolpath_homing_with_known_position_moves():
    toolpath = to_toolpath(parse_gcode("G28 X\n"), Point3(10.0, 5.0, 1.0), 600.0)
    (segment,) = toolpath.segments
    assert segment.end == Point3(0.0, 5.0, 1.0)
    assert not segment.extruding


def test_toolpath_dwell_adds_time():
    toolpath = to_toolpath(parse_gcode("G4 S2\nG1 X10 F600\nG4 P500\n"), ORIGIN)
    assert print_time(toolpath) == pytest.approx(3.5)


@pytest.mark.parametrize("line", ["G91", "M83", "G2 X1 Y1 I1 J0", "G20", "G92 X0"])
def test_toolpath_rejects_unsupported_modes(line):
    with pytest.raises(UnsupportedCommandError):
        to_toolpath(parse_gcode(f"G28\n{line}\n"))


def test_toolpath_rejects_bad_default_feedrate():
    with pytest.raises(ToolpathError):
        to_toolpath(parse_gcode("G28\n"), ORIGIN, 0.0)


def test_toolpath_chaining(gcode_corpus):
    toolpath = to_toolpath(parse_gcode(gcode_corpus))
    previous = toolpath.initial_position
    for segment in toolpath:
        assert segment.start == previous
        previous = segment.end


def test_toolpath_rejects_broken_chain():
    segment = Segment(Point3(1.0, 0.0, 0.0), Point3(2.0, 0.0, 0.0), 600.0)
    with pytest.raises(ToolpathError):
        Toolpath((segment,), ORIGIN)


def test_print_time_examples():
    assert print_time(Toolpath()) == 0.0
    segment = Segment(ORIGIN, Point3(100.0, 0.0, 0.0), 1200.0)
    assert print_time(Toolpath((segment,))) == pytest.approx(5.0)


def test_print_time_scales_with_feedrate(gcode_corpus):
    toolpath = to_toolpath(parse_gcode(gcode_corpus)).with_feedrate(600.0)
    faster = toolpath.with_feedrate(1800.0)
    assert print_time(faster) == pytest.approx(print_time(toolpath) / 3)


def test_print_time_additive_over_concatenation():
    program = parse_gcode("G28\nG1 X10 F600\nG1 Y10\nG1 X0 F300\n")
    whole = to_toolpath(program)
    head = Toolpath(whole.segments[:1], whole.initial_position)
    tail = Toolpath(whole.segments[1:], head.end_position)
    assert print_time(head + tail) == pytest.approx(print_time(head) + print_time(tail))
    assert print_time(head + tail) == pytest.approx(print_time(whole))


def test_toolpath_bounds_and_layers():
    program = parse_gcode("G28\nG1 Z0.2 F600\nG0 X50 Y50\nG1 X60 E1\nG1 Y55 E2\n")
    toolpath = to_toolpath(program)
    assert toolpath.bounds(extruding_only=True) == ((50.0, 50.0), (60.0, 55.0))
    assert toolpath.bounds() == ((0.0, 0.0), (60.0, 55.0))
    assert toolpath.layers() == [1]
    assert len(toolpath.layer(1)) == 4
    assert toolpath.vertices().shape == (5, 3)
