import numpy as np
import scipy.signal as sgl

from stealth_print.acoustics.audio import AudioBuffer
from stealth_print.errors import SignalError

FILTER_KINDS = ("lowpass", "highpass", "bandpass")


def design_butterworth(kind: str, cutoff, sample_rate: float, order: int = 4) -> np.ndarray:
    """
    Digital Butterworth filter as second-order sections.

    The analog prototype is mapped by the bilinear transform with the cutoffs prewarped, so the
    digital response is exactly −3 dB at each cutoff.

    Parameters
    ----------
    - kind: "lowpass", "highpass" or "bandpass"
    - cutoff: Hz, a pair (f1, f2) for "bandpass"
    - sample_rate: Hz
    - order: prototype order; a bandpass has twice as many poles
    """
    if kind not in FILTER_KINDS:
        raise SignalError(f"filter kind must be one of {FILTER_KINDS}, got {kind!r}")
    if order < 1:
        raise SignalError(f"filter order must be >= 1, got {order}")
    nyquist = sample_rate / 2.0
    cutoffs = np.atleast_1d(np.asarray(cutoff, dtype=float))
    expected = 2 if kind == "bandpass" else 1
    if cutoffs.size != expected:
        raise SignalError(f"{kind} needs {expected} cutoff frequencies, got {cutoffs.size}")
    if not ((cutoffs > 0) & (cutoffs < nyquist)).all():
        raise SignalError(f"cutoffs {cutoffs.tolist()} Hz must lie in (0, {nyquist}) Hz")
    if kind == "bandpass" and not cutoffs[0] < cutoffs[1]:
        raise SignalError(f"bandpass needs f1 < f2, got {cutoffs.tolist()}")
    wn = cutoffs if kind == "bandpass" else float(cutoffs[0])
    return sgl.butter(order, wn, btype=kind, output="sos", fs=sample_rate)


def butterworth_filter(audio: AudioBuffer, kind: str, cutoff, order: int = 4) -> AudioBuffer:
    """
    Causal Butterworth filtering; the output has the input's length.

    The filter is first run over an odd reflection of the opening `order` periods of the lowest
    cutoff, from the steady state of its first sample, and that warm-up is dropped. A stationary
    input gives a stationary output from the first sample on.
    """
    sos = design_butterworth(kind, cutoff, audio.sample_rate, order)
    if len(audio) == 0:
        return audio
    samples = audio.samples
    lowest = float(np.min(np.atleast_1d(cutoff)))
    pad = min(len(samples) - 1, int(np.ceil(order * audio.sample_rate / lowest)))
    extended = np.concatenate([2.0 * samples[0] - samples[pad:0:-1], samples])
    filtered, _ = sgl.sosfilt(sos, extended, zi=sgl.sosfilt_zi(sos) * extended[0])
    return audio.with_samples(filtered[pad:])


def highpass(audio: AudioBuffer, fc: float, order: int = 4) -> AudioBuffer:
    return butterworth_filter(audio, "highpass", fc, order)


def bandpass(audio: AudioBuffer, f1: float, f2: float, order: int = 4) -> AudioBuffer:
    return butterworth_filter(audio, "bandpass", (f1, f2), order)
