from .printer import (
    Clock,
    PrinterPort,
    SimulatedMicrophone,
    SimulatedPrinter,
    StreamPort,
    VirtualClock,
    WallClock,
    extract_xyz,
    open_port,
)
from .streaming import (
    AudioSource,
    SyncEntry,
    SyncLog,
    SyncResult,
    load_sync_log,
    save_sync_log,
    stream_with_sync,
)

__all__ = [
    "AudioSource",
    "Clock",
    "PrinterPort",
    "SimulatedMicrophone",
    "SimulatedPrinter",
    "StreamPort",
    "SyncEntry",
    "SyncLog",
    "SyncResult",
    "VirtualClock",
    "WallClock",
    "extract_xyz",
    "load_sync_log",
    "open_port",
    "save_sync_log",
    "stream_with_sync",
]
