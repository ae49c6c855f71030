import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import loguru
import numpy as np

from stealth_print.errors import GCodeParseError

logger = loguru.logger

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")
_WORD = re.compile(r"[A-Za-z][^A-Za-z]*")
_CODE = re.compile(r"^([GM])0*(\d+)$")

MOVE_WORDS = ("X", "Y", "Z", "E", "F")
AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class Move:
    """
    Linear move (G0 travel or G1 feed).

    Attributes
    ----------
    - kind: "G0" or "G1"
    - x, y, z: target coordinates in mm, None when the word is absent
    - e: absolute extruder position in mm, None when absent
    - f: feedrate in mm/min, None when absent
    - comment: inline comment text following ';'
    """

    kind: str
    x: float | None = None
    y: float | None = None
    z: float | None = None
    e: float | None = None
    f: float | None = None
    comment: str | None = None

    @property
    def has_xyz(self) -> bool:
        return self.x is not None or self.y is not None or self.z is not None


@dataclass(frozen=True)
class Home:
    """G28. An empty `axes` tuple homes every axis."""

    axes: tuple[str, ...] = ()
    comment: str | None = None


@dataclass(frozen=True)
class FanSpeed:
    """M106 S<percent> / M107."""

    percent: float
    comment: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.percent <= 100.0:
            raise ValueError(f"fan speed must be in [0, 100] %, got {self.percent}")


@dataclass(frozen=True)
class HotendTemp:
    """M104 S<celsius>, or M109 when `wait` is set."""

    celsius: float
    wait: bool = False
    comment: str | None = None

    def __post_init__(self):
        if self.celsius < 0:
            raise ValueError(f"hotend temperature must be >= 0, got {self.celsius}")


@dataclass(frozen=True)
class WaitMoves:
    """M400: block until every queued move has completed."""

    comment: str | None = None


@dataclass(frozen=True)
class Dwell:
    """G4 pause, stored in seconds."""

    seconds: float
    comment: str | None = None


@dataclass(frozen=True)
class SetPosition:
    """G92. Logical position reset without motion."""

    x: float | None = None
    y: float | None = None
    z: float | None = None
    e: float | None = None
    comment: str | None = None


@dataclass(frozen=True)
class Passthrough:
    """Any line the parser does not interpret. Emitted byte-identically."""

    raw: str

    @property
    def code(self) -> str | None:
        """Normalised leading command word (e.g. "G91"), if any."""
        head = self.raw.split(";", 1)[0].strip().split()
        if not head:
            return None
        match = _CODE.match(head[0].upper())
        return f"{match.group(1)}{int(match.group(2))}" if match else None


@dataclass(frozen=True)
class Comment:
    """Empty line or full-line ';' comment, kept verbatim."""

    text: str


Command = Union[
    Move, Home, FanSpeed, HotendTemp, WaitMoves, Dwell, SetPosition, Passthrough, Comment
]


@dataclass(frozen=True)
class GCodeProgram:
    """
    Ordered command stream.

    Attributes
    ----------
    - commands: parsed commands, one per source line
    - source_line_numbers: 1-based source line of each command, None for inserted commands
    """

    commands: tuple[Command, ...]
    source_line_numbers: tuple[int | None, ...] = field(default=())

    def __post_init__(self):
        if not self.source_line_numbers:
            object.__setattr__(
                self, "source_line_numbers", tuple(range(1, len(self.commands) + 1))
            )
        if len(self.source_line_numbers) != len(self.commands):
            raise ValueError("one source line number is required per command")

    def __len__(self) -> int:
        return len(self.commands)

    @property
    def moves(self) -> list[Move]:
        return [command for command in self.commands if isinstance(command, Move)]


def _number(text: str, line_number: int, line: str) -> float:
    if not _NUMBER.match(text):
        raise GCodeParseError("malformed numeric word", line_number, line)
    return float(text)


def _split_words(code: str) -> list[tuple[str, str]]:
    words: list[tuple[str, str]] = []
    for token in code.split():
        for piece in _WORD.findall(token):
            words.append((piece[0].upper(), piece[1:]))
        if not token[0].isalpha():
            words.append(("", token))
    return words


def parse_line(line: str, line_number: int = 1) -> Command:
    """
    Parse one G-code line.

    Parameters
    ----------
    - line: the text of the line, without its line terminator
    - line_number: 1-based line number used in error messages

    Returns
    -------
    - the command the line maps to
    """
    line = line.rstrip("\r\n")
    stripped = line.strip()
    if stripped == "" or stripped.startswith(";"):
        return Comment(line)

    code, sep, comment_text = line.partition(";")
    comment = comment_text if sep else None
    words = _split_words(code)
    if not words or words[0][0] not in ("G", "M") or not words[0][1].isdigit():
        return Passthrough(line)
    head = f"{words[0][0]}{int(words[0][1])}"
    args = words[1:]
    letters = [letter for letter, _ in args]
    if "" in letters or len(set(letters)) != len(letters):
        return Passthrough(line)

    def values(allowed: Sequence[str]) -> dict[str, float] | None:
        parsed = {
            letter.lower(): _number(value, line_number, line)
            for letter, value in args
            if letter in allowed
        }
        return None if len(parsed) != len(args) else parsed

    if head in ("G0", "G1"):
        parsed = values(MOVE_WORDS)
        if parsed is not None:
            return Move(kind=head, comment=comment, **parsed)
    elif head == "G28":
        if all(letter in AXES for letter in letters):
            for _, value in args:
                if value:
                    _number(value, line_number, line)
            return Home(axes=tuple(letters), comment=comment)
    elif head == "G4":
        parsed = values(("P", "S"))
        if parsed is not None and len(parsed) == 1:
            seconds = parsed["p"] / 1000.0 if "p" in parsed else parsed["s"]
            return Dwell(seconds=seconds, comment=comment)
    elif head == "G92":
        parsed = values(("X", "Y", "Z", "E"))
        if parsed:
            return SetPosition(comment=comment, **parsed)
    elif head == "M106":
        parsed = values(("S",))
        if parsed is not None:
            percent = parsed.get("s", 100.0)
            if not 0.0 <= percent <= 100.0:
                raise GCodeParseError("fan speed outside [0, 100] %", line_number, line)
            return FanSpeed(percent=percent, comment=comment)
    elif head == "M107":
        if not args:
            return FanSpeed(percent=0.0, comment=comment)
    elif head in ("M104", "M109"):
        parsed = values(("S",))
        if parsed is not None and "s" in parsed:
            if parsed["s"] < 0:
                raise GCodeParseError("negative temperature", line_number, line)
            return HotendTemp(celsius=parsed["s"], wait=head == "M109", comment=comment)
    elif head == "M400":
        if not args:
            return WaitMoves(comment=comment)
    return Passthrough(line)


def parse_gcode(text: str) -> GCodeProgram:
    """
    Parse a G-code document. Every line maps to exactly one command.

    Parameters
    ----------
    - text: the document; LF or CRLF line endings

    Returns
    -------
    - the parsed program
    """
    lines = text.splitlines()
    commands = [parse_line(line, number) for number, line in enumerate(lines, start=1)]
    return GCodeProgram(tuple(commands), tuple(range(1, len(commands) + 1)))


def format_number(value: float, decimals: int = 3) -> str:
    """Fixed-point text with at least `decimals` digits, more when needed to stay exact."""
    text = f"{value:.{decimals}f}"
    if float(text) != value:
        text = np.format_float_positional(value, unique=True, trim="-")
        digits = len(text.partition(".")[2])
        if digits < decimals:
            text = f"{value:.{decimals}f}"
    if text.startswith("-") and float(text) == 0.0:
        text = text[1:]
    return text


def _with_comment(text: str, comment: str | None) -> str:
    return text if comment is None else f"{text} ;{comment}"


def emit_command(command: Command, decimals: int = 3) -> str:
    """Canonical text of one command."""
    if isinstance(command, Comment):
        return command.text
    if isinstance(command, Passthrough):
        return command.raw
    if isinstance(command, Move):
        words = [command.kind]
        for letter in MOVE_WORDS:
            value = getattr(command, letter.lower())
            if value is not None:
                words.append(f"{letter}{format_number(value, decimals)}")
        return _with_comment(" ".join(words), command.comment)
    if isinstance(command, Home):
        return _with_comment(" ".join(["G28", *command.axes]), command.comment)
    if isinstance(command, FanSpeed):
        return _with_comment(f"M106 S{format_number(command.percent, decimals)}", command.comment)
    if isinstance(command, HotendTemp):
        code = "M109" if command.wait else "M104"
        return _with_comment(f"{code} S{format_number(command.celsius, decimals)}", command.comment)
    if isinstance(command, WaitMoves):
        return _with_comment("M400", command.comment)
    if isinstance(command, Dwell):
        return _with_comment(f"G4 S{format_number(command.seconds, decimals)}", command.comment)
    if isinstance(command, SetPosition):
        words = ["G92"]
        for letter in ("X", "Y", "Z", "E"):
            value = getattr(command, letter.lower())
            if value is not None:
                words.append(f"{letter}{format_number(value, decimals)}")
        return _with_comment(" ".join(words), command.comment)
    raise TypeError(f"not a G-code command: {command!r}")


def emit_gcode(program: GCodeProgram, decimals: int = 3) -> str:
    """
    Emit a program in canonical form (word order G/X/Y/Z/E/F, LF line endings).

    Parameters
    ----------
    - program: program to emit
    - decimals: minimum number of decimal digits of numeric words

    Returns
    -------
    - the G-code text, terminated by a newline when non-empty
    """
    lines = [emit_command(command, decimals) for command in program.commands]
    return "\n".join(lines) + ("\n" if lines else "")


def read_gcode(path: Path) -> GCodeProgram:
    """Read and parse a UTF-8 G-code file."""
    text = Path(path).read_text(encoding="utf-8")
    program = parse_gcode(text)
    logger.debug(f"parsed {len(program)} lines from {path}")
    return program


def write_gcode(program: GCodeProgram, path: Path, decimals: int = 3) -> None:
    """Write a program as UTF-8 text with LF line endings."""
    Path(path).write_text(emit_gcode(program, decimals), encoding="utf-8", newline="\n")
