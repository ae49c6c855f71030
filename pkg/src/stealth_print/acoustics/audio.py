from dataclasses import dataclass
from pathlib import Path

import loguru
import numpy as np
import pandas as pd
from scipy.io import wavfile

from stealth_print.errors import FileFormatError, SignalError

logger = loguru.logger

DEFAULT_SAMPLE_RATE = 44100
SERIES_COLUMNS = ["t_seconds", "value"]
PATH_COLUMNS = ["x_mm", "y_mm"]


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """
    Mono audio.

    Attributes
    ----------
    - samples: read-only float64 array
    - sample_rate: Hz
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float).reshape(-1)
        if not self.sample_rate > 0:
            raise SignalError(f"sample rate must be > 0 Hz, got {self.sample_rate}")
        if not np.isfinite(samples).all():
            raise SignalError("audio contains NaN or infinite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)

    def scaled(self, factor: float) -> "AudioBuffer":
        return self.with_samples(self.samples * factor)

    def slice(self, start: float, stop: float) -> "AudioBuffer":
        """Samples with start <= t < stop, in seconds."""
        i0 = max(0, int(round(start * self.sample_rate)))
        i1 = min(len(self.samples), int(round(stop * self.sample_rate)))
        return self.with_samples(self.samples[i0:i1])


def write_wav(audio: AudioBuffer, path: Path) -> None:
    """16-bit PCM mono; samples are clipped to [-1, 1]."""
    pcm = np.round(np.clip(audio.samples, -1.0, 1.0) * 32767.0).astype("<i2")
    wavfile.write(Path(path), audio.sample_rate, pcm)


def read_wav(path: Path) -> AudioBuffer:
    """
    Read a WAV file as a mono buffer in [-1, 1].

    Integer PCM is scaled by its full-scale value; multi-channel files are averaged.
    """
    try:
        sample_rate, data = wavfile.read(Path(path))
    except (ValueError, EOFError) as error:
        raise FileFormatError(f"{path}: not a readable WAV file ({error})") from error
    if data.dtype == np.uint8:
        samples = (data.astype(float) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.integer):
        samples = data.astype(float) / float(-np.iinfo(data.dtype).min)
    else:
        samples = data.astype(float)
    if samples.ndim == 2:
        logger.debug(f"{path}: averaging {samples.shape[1]} channels")
        samples = samples.mean(axis=1)
    return AudioBuffer(samples, sample_rate)


def read_table(path: Path, columns: list[str]) -> pd.DataFrame:
    """Read a CSV with exactly `columns` as header; every value numeric or blank."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise FileFormatError(f"{path}: unreadable CSV ({error})") from error
    if list(frame.columns) != columns:
        raise FileFormatError(f"{path}: expected header {','.join(columns)}", row=1)
    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna() & frame[column].notna()
        if bad.any():
            # header is row 1
            raise FileFormatError(f"{path}: non-numeric {column}", row=int(bad.idxmax()) + 2)
        frame[column] = values.astype(float)
    return frame


def save_series(times, values, path: Path) -> None:
    """CSV `t_seconds,value`; NaN values are written as empty fields."""
    frame = pd.DataFrame({"t_seconds": np.asarray(times, dtype=float), "value": np.asarray(values, dtype=float)})
    frame.to_csv(path, index=False, lineterminator="\n")


def load_series(path: Path) -> pd.DataFrame:
    return read_table(path, SERIES_COLUMNS)


def save_path(points, path: Path) -> None:
    """CSV `x_mm,y_mm`, one turn point per row."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    pd.DataFrame(points, columns=PATH_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def load_path(path: Path) -> np.ndarray:
    frame = read_table(path, PATH_COLUMNS)
    if frame.isna().any().any():
        raise FileFormatError(f"{path}: missing coordinates", row=int(frame.isna().any(axis=1).idxmax()) + 2)
    return frame.to_numpy(dtype=float)
