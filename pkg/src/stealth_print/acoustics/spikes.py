from dataclasses import dataclass, field
from pathlib import Path

import loguru
import numpy as np
import scipy.ndimage as ndi
import scipy.signal as sgl

from stealth_print.acoustics.audio import AudioBuffer, load_path, load_series, save_path, save_series
from stealth_print.acoustics.filters import bandpass
from stealth_print.errors import ConfigError, FileFormatError, SignalError

logger = loguru.logger


@dataclass(frozen=True)
class SpikeParams:
    """
    Stepper-burst detector settings.

    Attributes
    ----------
    - band: (f1, f2) Hz pass band
    - threshold: fraction of the envelope maximum a peak must reach
    - min_separation: s between two kept peaks
    - envelope_window: s, width of the moving average over the rectified signal
    - order: Butterworth prototype order
    """

    band: tuple[float, float] = (100.0, 600.0)
    threshold: float = 0.3
    min_separation: float = 0.1
    envelope_window: float = 0.005
    order: int = 4

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if not self.min_separation > 0:
            raise ConfigError("min_separation must be > 0 s")
        if not self.envelope_window > 0:
            raise ConfigError("envelope_window must be > 0 s")
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """Detected burst times in seconds, strictly increasing, with their normalised envelope height."""

    times: np.ndarray
    heights: np.ndarray | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        if np.any(np.diff(times) <= 0):
            raise SignalError("spike times must be strictly increasing")
        heights = np.ones_like(times) if self.heights is None else np.array(self.heights, dtype=float).reshape(-1)
        if heights.shape != times.shape:
            raise SignalError("one height per spike time is required")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "heights", heights)

    def __len__(self) -> int:
        return len(self.times)

    def intervals(self) -> np.ndarray:
        return np.diff(self.times)


@dataclass(frozen=True)
class ReconstructionParams:
    """
    Turn-point reconstruction settings.

    Attributes
    ----------
    - speed: assumed constant feedrate in mm/min
    - y_step: mm between rows
    - sg_window, sg_polyorder: Savitzky–Golay smoothing of the spike intervals
    - first_direction: +1 or -1, X direction of the first interval
    - stray_ratio: intervals further than this from their neighbours are not smoothed
    """

    speed: float = 1200.0
    y_step: float = 2.0
    sg_window: int = 5
    sg_polyorder: int = 2
    first_direction: int = -1
    stray_ratio: float = 0.5

    def __post_init__(self):
        if not self.speed > 0:
            raise ConfigError("speed must be > 0 mm/min")
        _check_savgol(self.sg_window, self.sg_polyorder)
        if self.first_direction not in (-1, 1):
            raise ConfigError("first_direction must be +1 or -1")
        if not self.stray_ratio > 0:
            raise ConfigError("stray_ratio must be > 0")


@dataclass(frozen=True, eq=False)
class ReconstructedPath:
    """Turn points of the reconstructed zigzag in mm, one per spike."""

    points: np.ndarray
    assumed_speed: float = 1200.0
    lengths: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 2)
        if not self.assumed_speed > 0:
            raise SignalError("assumed speed must be > 0 mm/min")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "lengths", np.array(self.lengths, dtype=float))

    def __len__(self) -> int:
        return len(self.points)

    def translated(self, dx: float, dy: float) -> "ReconstructedPath":
        return ReconstructedPath(self.points + [dx, dy], self.assumed_speed, self.lengths)


def _check_savgol(window: int, polyorder: int) -> None:
    if polyorder < 0:
        raise ConfigError(f"sg_polyorder must be >= 0, got {polyorder}")
    if window % 2 == 0 or window <= polyorder:
        raise ConfigError(f"sg_window must be odd and > sg_polyorder, got {window} and {polyorder}")


def envelope(audio: AudioBuffer, params: SpikeParams = SpikeParams()) -> np.ndarray:
    """Band-passed, rectified and moving-averaged signal, normalised to a maximum of 1."""
    filtered = bandpass(audio, *params.band, order=params.order)
    size = max(1, int(round(params.envelope_window * audio.sample_rate)))
    smooth = ndi.uniform_filter1d(np.abs(filtered.samples), size, mode="constant")
    peak = smooth.max() if len(smooth) else 0.0
    if peak <= 0:
        return np.zeros_like(smooth)
    return smooth / peak


def detect_spikes(audio: AudioBuffer, params: SpikeParams = SpikeParams()) -> SpikeTrain:
    """
    Stepper bursts in a recording.

    Peaks of the normalised envelope reaching `threshold` are kept, at least `min_separation`
    apart; of two close peaks the larger wins. Silent audio gives an empty train.
    """
    if len(audio) == 0:
        raise SignalError("empty audio")
    env = envelope(audio, params)
    if not env.any():
        logger.warning("audio is silent in the stepper band")
        return SpikeTrain(np.zeros(0))
    distance = max(1, int(round(params.min_separation * audio.sample_rate)))
    peaks, properties = sgl.find_peaks(env, height=params.threshold, distance=distance)
    logger.info(f"detected {len(peaks)} spikes above {params.threshold} of the envelope maximum")
    return SpikeTrain(peaks / audio.sample_rate, properties["peak_heights"])


def _savgol(series: np.ndarray, window: int, polyorder: int) -> np.ndarray:
    if len(series) < window:
        window = len(series) if len(series) % 2 else len(series) - 1
        if window <= polyorder:
            return series.copy()
    return sgl.savgol_filter(series, window, polyorder, mode="interp", axis=0)


def _smooth_side(series: np.ndarray, window: int, polyorder: int, stray_ratio: float) -> np.ndarray:
    keep = np.ones(len(series), dtype=bool)
    while True:
        kept = series[keep]
        smooth = _savgol(kept, window, polyorder)
        # the filter is linear, so the impulse responses give each sample's weight on itself
        weight = np.diag(_savgol(np.eye(len(kept)), window, polyorder))
        free = weight < 1.0 - 1e-9
        if not free.any():
            break
        # residual against the fit of the neighbours alone
        left_out = np.zeros(len(kept))
        left_out[free] = (kept[free] - smooth[free]) / (1.0 - weight[free])
        score = np.abs(left_out) / np.maximum(np.abs(kept - left_out), 1e-12)
        worst = int(np.argmax(score))
        if score[worst] <= stray_ratio:
            break
        index = int(np.flatnonzero(keep)[worst])
        logger.debug(f"interval {index} of its side is {score[worst]:.2f} off its neighbours; kept unsmoothed")
        keep[index] = False
    result = series.copy()
    result[keep] = smooth
    return result


def smooth_intervals(
    dt: np.ndarray, window: int = 5, polyorder: int = 2, stray_ratio: float = 0.5
) -> np.ndarray:
    """
    Savitzky–Golay smoothing of the even and the odd intervals, each as its own series.

    Runs alternate between the two sides of the part, so each side keeps its own trend. The
    ends are fitted with the window polynomial, which leaves trends up to `polyorder` intact.
    With fewer samples than the window, the window shrinks to the largest odd length that still
    exceeds the polyorder; when there is none the series is returned as it is.

    An interval that differs from what its neighbours predict by more than `stray_ratio` of
    that prediction is a stray (a start or park move, a missed burst) and keeps its measured
    value; the side is smoothed without it, worst stray first.
    """
    _check_savgol(window, polyorder)
    if not stray_ratio > 0:
        raise ConfigError(f"stray_ratio must be > 0, got {stray_ratio}")
    dt = np.asarray(dt, dtype=float)
    smooth = np.empty_like(dt)
    smooth[0::2] = _smooth_side(dt[0::2], window, polyorder, stray_ratio)
    smooth[1::2] = _smooth_side(dt[1::2], window, polyorder, stray_ratio)
    return smooth


def reconstruct_from_spikes(
    spikes: SpikeTrain,
    speed: float,
    y_step: float,
    sg_window: int = 5,
    sg_polyorder: int = 2,
    first_direction: int = 1,
    origin: tuple[float, float] = (0.0, 0.0),
    stray_ratio: float = 0.5,
) -> ReconstructedPath:
    """
    Rebuild the raster from the time between bursts.

    Each interval times a straight run at `speed`; runs alternate in X and every turn advances
    one row in Y.

    Parameters
    ----------
    - spikes: at least two spike times
    - speed: mm/min
    - y_step: mm per row
    - sg_window, sg_polyorder: Savitzky–Golay smoothing of the intervals
    - first_direction: sign of the first X run
    - origin: the first turn point
    - stray_ratio: relative deviation past which an interval is left unsmoothed

    Returns
    -------
    - one turn point per spike
    """
    if len(spikes) < 2:
        raise SignalError(
            f"need at least 2 spikes, got {len(spikes)}; lower the threshold or the minimum separation"
        )
    if not speed > 0:
        raise SignalError(f"speed must be > 0 mm/min, got {speed}")
    if first_direction not in (-1, 1):
        raise ConfigError("first_direction must be +1 or -1")
    lengths = smooth_intervals(spikes.intervals(), sg_window, sg_polyorder, stray_ratio) * speed / 60.0
    signs = first_direction * (-1.0) ** np.arange(len(lengths))
    x = origin[0] + np.concatenate([[0.0], np.cumsum(signs * lengths)])
    y = origin[1] + y_step * np.arange(len(spikes))
    return ReconstructedPath(np.column_stack([x, y]), speed, lengths)


def save_spike_train(spikes: SpikeTrain, path: Path) -> None:
    save_series(spikes.times, spikes.heights, path)


def load_spike_train(path: Path) -> SpikeTrain:
    frame = load_series(path)
    try:
        return SpikeTrain(frame["t_seconds"].to_numpy(), frame["value"].to_numpy())
    except SignalError as error:
        raise FileFormatError(f"{path}: {error}") from error


def save_reconstruction(recon: ReconstructedPath, path: Path) -> None:
    save_path(recon.points, path)


def load_reconstruction(path: Path, assumed_speed: float = 1200.0) -> ReconstructedPath:
    return ReconstructedPath(load_path(path), assumed_speed)
