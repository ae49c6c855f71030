import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import loguru
import pandas as pd

from stealth_print.acoustics import AudioBuffer
from stealth_print.acoustics.audio import read_table
from stealth_print.errors import (
    AudioSourceError,
    FileFormatError,
    PortTimeoutError,
    StealthPrintError,
    SyncError,
)
from stealth_print.gcode import Comment, GCodeProgram, emit_command
from stealth_print.sync.printer import ACK, Clock, PrinterPort, WallClock, extract_xyz

logger = loguru.logger

SYNC_COLUMNS = ["t_seconds", "x_mm", "y_mm", "z_mm"]
BARRIER = "M400"
# unsolicited lines (echo:, busy:) tolerated while waiting for one acknowledgment
MAX_CHATTER = 100


class AudioSource(Protocol):
    def start(self) -> None: ...

    def stop(self) -> AudioBuffer: ...


@dataclass(frozen=True)
class SyncEntry:
    """Target coordinates of a motion line, and the time its M400 was acknowledged."""

    elapsed: float
    x: float | None = None
    y: float | None = None
    z: float | None = None

    def __post_init__(self):
        if self.x is None and self.y is None and self.z is None:
            raise SyncError("a sync entry needs at least one coordinate")


@dataclass(frozen=True)
class SyncLog:
    """Entries in time order; equal times are allowed for zero-duration motion."""

    entries: tuple[SyncEntry, ...] = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        for k in range(1, len(entries)):
            if entries[k].elapsed < entries[k - 1].elapsed:
                raise SyncError(f"non-monotonic time at entry {k}")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.elapsed, e.x, e.y, e.z) for e in self.entries], columns=SYNC_COLUMNS, dtype=float
        )


@dataclass
class SyncResult:
    log: SyncLog
    audio: AudioBuffer
    lines_sent: int = 0


def _stream_lines(program: GCodeProgram | Iterable[str]) -> list[str]:
    """Lines to send: comments and empty lines never reach the port."""
    if isinstance(program, GCodeProgram):
        return [emit_command(c) for c in program.commands if not isinstance(c, Comment)]
    lines = [line.strip() for line in program]
    return [line for line in lines if line and not line.startswith(";")]


def _await_ack(port: PrinterPort, line: str, last_acknowledged: int) -> None:
    for _ in range(MAX_CHATTER):
        response = port.receive()
        if response == ACK:
            return
        if response == "":
            raise PortTimeoutError(f"no acknowledgment for {line!r}", last_acknowledged)
        logger.debug(f"printer: {response}")
    raise PortTimeoutError(f"no acknowledgment for {line!r} among {MAX_CHATTER} responses", last_acknowledged)


def stream_with_sync(
    program: GCodeProgram | Iterable[str],
    port: PrinterPort,
    audio_source: AudioSource,
    clock: Clock | None = None,
) -> SyncResult:
    """
    Stream G-code one line at a time, logging when each motion has completed.

    The audio source and the timer start together. Each line is sent and acknowledged, then
    M400 is sent and its "ok" awaited, so the motion has finished when the timestamp is taken.
    Lines carrying X, Y or Z words append their target coordinates and the elapsed time.

    Parameters
    ----------
    - program: parsed program, or raw lines
    - port: printer connection
    - audio_source: started before the first line, stopped after the last
    - clock: time base; defaults to the port's clock, else the wall clock

    Returns
    -------
    - the sync log and the recorded audio, both timed from the same origin
    """
    lines = _stream_lines(program)
    clock = clock or getattr(port, "clock", None) or WallClock()
    entries: list[SyncEntry] = []
    last_acknowledged = -1

    try:
        audio_source.start()
    except Exception as error:
        raise AudioSourceError(f"audio source failed to start: {error}", SyncLog()) from error
    origin = clock.now()

    try:
        for index, line in enumerate(lines):
            coords = extract_xyz(line, index + 1)
            port.send(line)
            _await_ack(port, line, last_acknowledged)
            port.send(BARRIER)
            _await_ack(port, BARRIER, last_acknowledged)
            last_acknowledged = index
            if coords:
                entries.append(SyncEntry(clock.now() - origin, **coords))
    except StealthPrintError:
        logger.error(f"streaming stopped after line {last_acknowledged}")
        _stop_quietly(audio_source)
        raise

    log = SyncLog(tuple(entries))
    try:
        audio = audio_source.stop()
    except Exception as error:
        raise AudioSourceError(f"audio source failed: {error}", log) from error
    logger.info(f"streamed {len(lines)} lines, logged {len(log)} positions")
    return SyncResult(log, audio, len(lines))


def _stop_quietly(audio_source: AudioSource) -> None:
    try:
        audio_source.stop()
    except Exception as error:
        logger.warning(f"audio source did not stop cleanly: {error}")


def save_sync_log(log: SyncLog, path: Path) -> None:
    """CSV `t_seconds,x_mm,y_mm,z_mm`; unset coordinates are blank."""
    log.to_frame().to_csv(path, index=False, lineterminator="\n")


def load_sync_log(path: Path) -> SyncLog:
    frame = read_table(path, SYNC_COLUMNS)
    entries = []
    previous = -math.inf
    for k, row in enumerate(frame.itertuples(index=False)):
        t, x, y, z = (None if pd.isna(v) else float(v) for v in row)
        if t is None:
            raise FileFormatError(f"{path}: missing time", row=k + 2)
        if t < previous:
            raise FileFormatError(f"{path}: non-monotonic time", row=k + 2)
        if x is None and y is None and z is None:
            raise FileFormatError(f"{path}: entry without coordinates", row=k + 2)
        entries.append(SyncEntry(t, x, y, z))
        previous = t
    return SyncLog(tuple(entries))
