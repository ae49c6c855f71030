from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from stealth_print.acoustics.audio import AudioBuffer
from stealth_print.errors import SignalError


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """
    One-sided STFT magnitudes.

    Attributes
    ----------
    - times: s, center of each frame
    - freqs: Hz, bin frequencies (resolution sample_rate / fft_size)
    - magnitude: (len(freqs), len(times)) array
    - window: the analysis window
    """

    times: np.ndarray
    freqs: np.ndarray
    magnitude: np.ndarray
    window: np.ndarray

    def dominant_frequency(self) -> float:
        """Frequency of the bin with the largest total magnitude."""
        return float(self.freqs[int(np.argmax(self.magnitude.sum(axis=1)))])

    def frame_power(self) -> np.ndarray:
        """Σ|x·w|² of each frame, recovered from the one-sided spectrum (Parseval)."""
        n = len(self.window)
        weights = np.full(len(self.freqs), 2.0)
        weights[0] = 1.0
        if n % 2 == 0:
            weights[-1] = 1.0
        return (weights[:, None] * self.magnitude**2).sum(axis=0) / n


def spectrogram(audio: AudioBuffer, fft_size: int = 1024, hop: int = 256) -> Spectrogram:
    """
    Hann-windowed short-time Fourier transform.

    Parameters
    ----------
    - audio: at least `fft_size` samples
    - fft_size: frame length, a power of two
    - hop: samples between frames, 1 <= hop <= fft_size
    """
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise SignalError(f"fft_size must be a power of two, got {fft_size}")
    if not 1 <= hop <= fft_size:
        raise SignalError(f"hop must be in [1, {fft_size}], got {hop}")
    if len(audio) < fft_size:
        raise SignalError(f"audio has {len(audio)} samples, fewer than fft_size {fft_size}")
    window = get_window("hann", fft_size)
    frames = sliding_window_view(audio.samples, fft_size)[::hop]
    magnitude = np.abs(np.fft.rfft(frames * window, axis=1)).T
    times = (np.arange(frames.shape[0]) * hop + fft_size / 2.0) / audio.sample_rate
    freqs = np.fft.rfftfreq(fft_size, 1.0 / audio.sample_rate)
    return Spectrogram(times, freqs, magnitude, window)


def save_spectrogram(spec: Spectrogram, path: Path) -> None:
    """CSV matrix: first column freq_hz, one column per frame named by its time in seconds."""
    frame = pd.DataFrame(spec.magnitude, columns=[f"{t:.6f}" for t in spec.times])
    frame.insert(0, "freq_hz", spec.freqs)
    frame.to_csv(path, index=False, lineterminator="\n")
