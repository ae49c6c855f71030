import time
from collections import deque
from typing import Protocol

import loguru
import numpy as np

from stealth_print.acoustics import AcousticModel, AudioBuffer, synthesize_audio
from stealth_print.acoustics.audio import DEFAULT_SAMPLE_RATE
from stealth_print.errors import AudioSourceError, ConfigError, UnsupportedCommandError
from stealth_print.gcode import MachineState, Move, Point3, Segment, Toolpath, WaitMoves, parse_line
from stealth_print.gcode.toolpath import DEFAULT_FEEDRATE

logger = loguru.logger

ACK = "ok"
PORT_SCHEMES = ("sim://virtual", "sim://realtime")


def extract_xyz(line: str, line_number: int = 1) -> dict[str, float]:
    """
    Coordinates carried by a G-code line.

    Only the X, Y and Z words of a G0/G1 move count; bare axis letters (as in `G28 X Y`) and
    every other command give an empty dict.

    Raises GCodeParseError on a malformed number.
    """
    command = parse_line(line, line_number)
    if not isinstance(command, Move):
        return {}
    return {axis: value for axis in ("x", "y", "z") if (value := getattr(command, axis)) is not None}


class Clock(Protocol):
    tick: float

    def now(self) -> float: ...

    def advance(self, seconds: float) -> None: ...


class VirtualClock:
    """Simulated time, moved forward only by `advance`. Readings are rounded to `tick` seconds."""

    def __init__(self, tick: float = 1e-3):
        if not tick > 0:
            raise ConfigError(f"tick must be > 0 s, got {tick}")
        self.tick = tick
        self._time = 0.0

    def now(self) -> float:
        return round(self._time / self.tick) * self.tick

    def advance(self, seconds: float) -> None:
        self._time += max(0.0, seconds)


class WallClock:
    """Monotonic wall time; `advance` sleeps."""

    tick = 1e-3

    def __init__(self):
        self._origin = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._origin

    def advance(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class PrinterPort(Protocol):
    """Line channel to a printer: newline-free ASCII lines out, acknowledgment lines back."""

    def send(self, line: str) -> None: ...

    def receive(self) -> str: ...


class SimulatedPrinter:
    """
    Printer answering the line protocol.

    Every accepted line is acknowledged with "ok" at once; motion is queued. M400 runs the
    queue, advancing the clock by each segment's duration, and is acknowledged only after
    the queue has drained. `executed` keeps every segment that ran with its start time.

    Parameters
    ----------
    - position: nozzle position at power-on, None when unknown until homing
    - clock: VirtualClock for instantaneous runs, WallClock to move in real time
    - feedrate: mm/min until a line sets one
    """

    def __init__(
        self,
        position: Point3 | None = None,
        clock: Clock | None = None,
        feedrate: float = DEFAULT_FEEDRATE,
    ):
        self.clock: Clock = VirtualClock() if clock is None else clock
        self.state = MachineState(position, feedrate)
        self.queue: deque[Segment] = deque()
        self.executed: list[tuple[float, Segment]] = []
        self._responses: deque[str] = deque()
        self._received = 0

    @property
    def position(self) -> Point3 | None:
        return self.state.position

    def send(self, line: str) -> None:
        command = parse_line(line, self._received + 1)
        self._received += 1
        if isinstance(command, WaitMoves):
            self.run_queue()
        else:
            self.queue.extend(self.state.execute(command, self._received - 1))
        self._responses.append(ACK)

    def receive(self) -> str:
        """Next response line; empty when nothing is pending."""
        return self._responses.popleft() if self._responses else ""

    def run_queue(self) -> None:
        while self.queue:
            segment = self.queue.popleft()
            self.executed.append((self.clock.now(), segment))
            self.clock.advance(segment.duration)


class SimulatedMicrophone:
    """
    Records what a microphone beside a `SimulatedPrinter` would hear.

    `stop` synthesizes the segments the printer ran since `start`, idle time included, so the
    audio starts at the clock reading taken by `start`.
    """

    def __init__(
        self,
        printer: SimulatedPrinter,
        model: AcousticModel = AcousticModel(),
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        seed: int = 42,
    ):
        self.printer = printer
        self.model = model
        self.sample_rate = sample_rate
        self.seed = seed
        self._started: float | None = None

    def start(self) -> None:
        self._started = self.printer.clock.now()

    def stop(self) -> AudioBuffer:
        if self._started is None:
            raise AudioSourceError("microphone stopped before it was started")
        start, self._started = self._started, None
        n = int(round((self.printer.clock.now() - start) * self.sample_rate))
        samples = np.zeros(n)
        toolpath = self._heard_toolpath(start)
        if toolpath is not None and n:
            audio = synthesize_audio(toolpath, self.model, self.sample_rate, self.seed)
            m = min(n, len(audio))
            samples[:m] = audio.samples[:m]
        logger.info(f"microphone captured {n / self.sample_rate:.2f} s")
        return AudioBuffer(samples, self.sample_rate)

    def _heard_toolpath(self, start: float) -> Toolpath | None:
        segments: list[Segment] = []
        cursor = start
        tick = self.printer.clock.tick
        for t0, segment in self.printer.executed:
            if t0 < start:
                continue
            if t0 - cursor > tick:
                # idle between two queue runs; shorter gaps are clock rounding
                idle = Segment(segment.start, segment.start, segment.feedrate, layer=segment.layer, dwell=t0 - cursor)
                segments.append(idle)
            segments.append(segment)
            cursor = t0 + segment.duration
        if not segments:
            return None
        return Toolpath(tuple(segments), segments[0].start)


class StreamPort:
    """
    `PrinterPort` over a byte stream with `write(bytes)` and `readline()`, such as an open
    pyserial port. A read timeout surfaces as an empty response.
    """

    def __init__(self, stream):
        self.stream = stream

    def send(self, line: str) -> None:
        self.stream.write(f"{line}\n".encode("ascii"))

    def receive(self) -> str:
        return self.stream.readline().decode("ascii", errors="replace").strip()


def open_port(url: str, position: Point3 | None = None, feedrate: float = DEFAULT_FEEDRATE) -> SimulatedPrinter:
    """`sim://virtual` runs on a VirtualClock, `sim://realtime` on the wall clock."""
    if url == "sim://virtual":
        return SimulatedPrinter(position, VirtualClock(), feedrate)
    if url == "sim://realtime":
        return SimulatedPrinter(position, WallClock(), feedrate)
    raise UnsupportedCommandError(f"unsupported port {url!r}; expected one of {PORT_SCHEMES}")
