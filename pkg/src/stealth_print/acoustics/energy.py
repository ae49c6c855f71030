import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import loguru
import numpy as np
import pandas as pd
from scipy.stats import linregress

from stealth_print.acoustics.audio import AudioBuffer
from stealth_print.acoustics.filters import highpass
from stealth_print.errors import FileFormatError, SignalError

logger = loguru.logger

DEFAULT_HIGHPASS_FC = 5000.0
DEFAULT_WINDOW = 0.1


@dataclass(frozen=True)
class EnergyLine:
    """log10(E) = slope · x + intercept, fitted on a calibration sweep."""

    slope: float
    intercept: float
    r_squared: float

    def position(self, energy) -> np.ndarray:
        """x in mm for each energy value; NaN where the energy is not positive."""
        energy = np.asarray(energy, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_energy = np.where(energy > 0, np.log10(energy), np.nan)
        return (log_energy - self.intercept) / self.slope


def windowed_energy(audio: AudioBuffer, window: float = DEFAULT_WINDOW) -> pd.DataFrame:
    """
    Mean absolute sample value over consecutive non-overlapping windows.

    A trailing partial window is dropped.

    Returns
    -------
    - DataFrame with columns t_seconds (window center) and value (E)
    """
    if len(audio) == 0:
        raise SignalError("empty audio")
    if not 0 < window <= audio.duration:
        raise SignalError(f"window must be in (0, {audio.duration:.3f}] s, got {window}")
    size = max(1, int(round(window * audio.sample_rate)))
    count = len(audio) // size
    blocks = np.abs(audio.samples[: count * size]).reshape(count, size)
    centers = (np.arange(count) + 0.5) * size / audio.sample_rate
    return pd.DataFrame({"t_seconds": centers, "value": blocks.mean(axis=1)})


def fit_energy_line(
    sweep_audio: AudioBuffer,
    x0: float,
    x1: float,
    speed: float,
    highpass_fc: float = DEFAULT_HIGHPASS_FC,
    window: float = DEFAULT_WINDOW,
) -> EnergyLine:
    """
    Calibrate the energy–distance law on a recording of one constant-speed X sweep.

    Parameters
    ----------
    - sweep_audio: recording starting when the sweep starts
    - x0, x1: sweep start and end in mm
    - speed: mm/min
    - highpass_fc: Hz, applied before the energy is computed
    - window: s

    Returns
    -------
    - least-squares fit of log10(E) against the nozzle x at each window center
    """
    if not speed > 0:
        raise SignalError(f"sweep speed must be > 0 mm/min, got {speed}")
    sweep_time = 60.0 * abs(x1 - x0) / speed
    if not math.isclose(sweep_audio.duration, sweep_time, rel_tol=0.05):
        raise SignalError(
            f"audio lasts {sweep_audio.duration:.2f} s but the sweep takes {sweep_time:.2f} s"
        )
    energy = windowed_energy(highpass(sweep_audio, highpass_fc), window)
    energy = energy[energy["t_seconds"] <= sweep_time]
    if len(energy) < 2:
        raise SignalError("sweep too short for a line fit")
    if (energy["value"] <= 0).any():
        silent = float(energy.loc[energy["value"] <= 0, "t_seconds"].iloc[0])
        raise SignalError(f"silent window at t = {silent:.2f} s")
    direction = 1.0 if x1 >= x0 else -1.0
    x = x0 + direction * np.minimum(speed / 60.0 * energy["t_seconds"].to_numpy(), abs(x1 - x0))
    fit = linregress(x, np.log10(energy["value"].to_numpy()))
    line = EnergyLine(float(fit.slope), float(fit.intercept), float(fit.rvalue**2))
    logger.info(f"energy line: slope {line.slope:.6f}/mm, intercept {line.intercept:.4f}, R² {line.r_squared:.5f}")
    return line


def predict_positions(
    audio: AudioBuffer,
    line: EnergyLine,
    highpass_fc: float = DEFAULT_HIGHPASS_FC,
    window: float = DEFAULT_WINDOW,
) -> pd.DataFrame:
    """
    Nozzle x per window from the calibrated energy line.

    Windows with zero energy get NaN rather than an interpolated value.

    Returns
    -------
    - DataFrame with columns t_seconds and value (x in mm)
    """
    if line.slope == 0:
        raise SignalError("energy line slope is zero; positions cannot be recovered")
    energy = windowed_energy(highpass(audio, highpass_fc), window)
    invalid = int((energy["value"] <= 0).sum())
    if invalid:
        logger.warning(f"{invalid} silent windows have no position")
    return pd.DataFrame({"t_seconds": energy["t_seconds"], "value": line.position(energy["value"])})


def save_energy_line(line: EnergyLine, path: Path) -> None:
    Path(path).write_text(json.dumps(asdict(line), indent=2) + "\n", encoding="utf-8")


def load_energy_line(path: Path) -> EnergyLine:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return EnergyLine(float(payload["slope"]), float(payload["intercept"]), float(payload["r_squared"]))
    except (KeyError, TypeError, ValueError) as error:
        raise FileFormatError(f"{path}: not an energy line file ({error})") from error
