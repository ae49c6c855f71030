"""Exception hierarchy shared by every stealth_print module."""

from typing import Any


class StealthPrintError(Exception):
    """Base class. `code` is the machine-readable name reported by the CLI."""

    code = "stealth_print_error"

    def context(self) -> dict[str, Any]:
        """Extra fields for the CLI's JSON diagnostic."""
        return {}


class GCodeParseError(StealthPrintError, ValueError):
    code = "gcode_parse_error"

    def __init__(self, message: str, line_number: int, line: str):
        super().__init__(f"line {line_number}: {message}: {line!r}")
        self.line_number = line_number
        self.line = line

    def context(self) -> dict[str, Any]:
        return {"line_number": self.line_number}


class UnsupportedCommandError(StealthPrintError, ValueError):
    code = "unsupported_command"


class ToolpathError(StealthPrintError, ValueError):
    code = "toolpath_error"


class GeometryError(StealthPrintError, ValueError):
    code = "geometry_error"


class BoundaryEscapeError(StealthPrintError, ValueError):
    code = "boundary_escape"


class OptimizationError(StealthPrintError, ValueError):
    code = "optimization_error"


class SignalError(StealthPrintError, ValueError):
    code = "signal_error"


class FileFormatError(StealthPrintError, ValueError):
    code = "file_format_error"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row

    def context(self) -> dict[str, Any]:
        return {} if self.row is None else {"row": self.row}


class PortTimeoutError(StealthPrintError, TimeoutError):
    code = "port_timeout"

    def __init__(self, message: str, last_acknowledged: int):
        super().__init__(f"{message} (last acknowledged line index: {last_acknowledged})")
        self.last_acknowledged = last_acknowledged

    def context(self) -> dict[str, Any]:
        return {"last_acknowledged": self.last_acknowledged}


class AudioSourceError(StealthPrintError, RuntimeError):
    code = "audio_source_error"

    def __init__(self, message: str, partial_log: Any = None):
        super().__init__(message)
        self.partial_log = partial_log

    def context(self) -> dict[str, Any]:
        return {} if self.partial_log is None else {"logged_positions": len(self.partial_log)}


class ConfigError(StealthPrintError, ValueError):
    code = "config_error"


class SyncError(StealthPrintError, ValueError):
    code = "sync_error"


class UsageError(StealthPrintError, ValueError):
    code = "usage_error"
