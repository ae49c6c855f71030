import math
from dataclasses import dataclass

import loguru
import numpy as np
from numpy.random import PCG64, Generator

from stealth_print.acoustics.audio import DEFAULT_SAMPLE_RATE, AudioBuffer
from stealth_print.errors import ConfigError, SignalError
from stealth_print.gcode import Toolpath

logger = loguru.logger

SPIKE_TRIGGERS = ("axis_reversal", "turn_angle")
SPIKE_BAND = (100.0, 600.0)
# direction components below this are treated as zero
_AXIS_EPSILON = 1e-9


@dataclass(frozen=True)
class AcousticModel:
    """
    Printer sound model.

    The fan tone follows a(t) = fan_base_amp · 10^(energy_slope · |x(t) − mic_x|). Direction
    changes add a damped sinusoid at `spike_center`.

    Attributes
    ----------
    - fan_freq: Hz
    - fan_base_amp: tone amplitude with the nozzle at the microphone
    - energy_slope: log10 units per mm
    - spike_center: Hz, inside the stepper band (100, 600)
    - spike_duration: s
    - spike_amp: burst peak amplitude
    - noise_sigma: white noise standard deviation
    - mic_x: mm
    - spike_trigger: "axis_reversal" or "turn_angle"
    - turn_threshold_deg: minimum turn for the "turn_angle" trigger
    - merge_window: s, bursts closer than this merge; None for `spike_duration`
    """

    fan_freq: float = 8000.0
    fan_base_amp: float = 0.3
    energy_slope: float = -0.004
    spike_center: float = 250.0
    spike_duration: float = 0.03
    spike_amp: float = 0.5
    noise_sigma: float = 0.0
    mic_x: float = 0.0
    spike_trigger: str = "axis_reversal"
    turn_threshold_deg: float = 30.0
    merge_window: float | None = None

    def __post_init__(self):
        if not self.fan_freq > 0:
            raise ConfigError(f"fan_freq must be > 0 Hz, got {self.fan_freq}")
        if not SPIKE_BAND[0] < self.spike_center < SPIKE_BAND[1]:
            raise ConfigError(f"spike_center must lie in {SPIKE_BAND} Hz, got {self.spike_center}")
        if not self.spike_duration > 0:
            raise ConfigError("spike_duration must be > 0 s")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.fan_base_amp < 0 or self.spike_amp < 0:
            raise ConfigError("amplitudes must be >= 0")
        if self.spike_trigger not in SPIKE_TRIGGERS:
            raise ConfigError(f"spike_trigger must be one of {SPIKE_TRIGGERS}")
        if not 0 < self.turn_threshold_deg <= 180:
            raise ConfigError("turn_threshold_deg must be in (0, 180]")
        if self.merge_window is not None and self.merge_window < 0:
            raise ConfigError("merge_window must be >= 0 s")

    @property
    def effective_merge_window(self) -> float:
        return self.spike_duration if self.merge_window is None else self.merge_window

    def fan_amplitude(self, x) -> np.ndarray:
        return self.fan_base_amp * 10.0 ** (self.energy_slope * np.abs(np.asarray(x, dtype=float) - self.mic_x))


def _segment_starts(toolpath: Toolpath) -> np.ndarray:
    durations = np.array([segment.duration for segment in toolpath.segments])
    return np.concatenate([[0.0], np.cumsum(durations)[:-1]])


def position_at(toolpath: Toolpath, times) -> np.ndarray:
    """
    Nozzle XYZ at the given times under constant-velocity kinematics.

    Before the first segment the nozzle is at the toolpath's initial position, after the last
    one at its end; during a dwell it stays at the segment's end.

    Returns
    -------
    - (n, 3) array in mm
    """
    times = np.asarray(times, dtype=float)
    if not toolpath.segments:
        return np.tile(np.asarray(toolpath.initial_position, dtype=float), (times.size, 1))
    starts = _segment_starts(toolpath)
    first = np.array([segment.start for segment in toolpath.segments], dtype=float)
    last = np.array([segment.end for segment in toolpath.segments], dtype=float)
    motion = np.array([60.0 * segment.length / segment.feedrate for segment in toolpath.segments])

    k = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(starts) - 1)
    local = times - starts[k]
    with np.errstate(divide="ignore", invalid="ignore"):
        fraction = np.where(motion[k] > 0, np.clip(local / motion[k], 0.0, 1.0), 1.0)
    fraction = np.where(local < 0, 0.0, fraction)
    return first[k] + fraction[:, None] * (last[k] - first[k])


def _turn_angle(a: tuple[float, float], b: tuple[float, float]) -> float:
    dot = max(-1.0, min(1.0, a[0] * b[0] + a[1] * b[1]))
    return math.degrees(math.acos(dot))


def turn_events(toolpath: Toolpath, model: AcousticModel = AcousticModel()) -> np.ndarray:
    """
    Onset times in seconds of the stepper bursts.

    With the "axis_reversal" trigger a burst starts at a segment whose X or Y velocity has the
    opposite sign of that axis's last nonzero velocity. With "turn_angle" it starts where the XY
    direction turns by at least `turn_threshold_deg`. Segments without XY motion are ignored.
    Events within `merge_window` of the previous kept event are dropped.
    """
    starts = _segment_starts(toolpath) if toolpath.segments else []
    events: list[float] = []
    signs = [0, 0]
    previous: tuple[float, float] | None = None
    for start, segment in zip(starts, toolpath.segments):
        direction = segment.direction_xy
        if direction is None:
            continue
        if model.spike_trigger == "axis_reversal":
            triggered = False
            for axis in (0, 1):
                component = direction[axis]
                if abs(component) <= _AXIS_EPSILON:
                    continue
                sign = 1 if component > 0 else -1
                if signs[axis] and sign != signs[axis]:
                    triggered = True
                signs[axis] = sign
        else:
            triggered = previous is not None and _turn_angle(previous, direction) >= model.turn_threshold_deg
        previous = direction
        if triggered:
            events.append(float(start))

    merged: list[float] = []
    for event in events:
        if not merged or event - merged[-1] >= model.effective_merge_window:
            merged.append(event)
    return np.array(merged)


def synthesize_audio(
    toolpath: Toolpath,
    model: AcousticModel = AcousticModel(),
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    seed: int = 42,
) -> AudioBuffer:
    """
    Synthesize what a microphone next to the printer records while `toolpath` runs.

    Parameters
    ----------
    - toolpath: non-empty toolpath, timed from t = 0
    - model: sound model
    - sample_rate: Hz
    - seed: seed of the noise stream

    Returns
    -------
    - audio spanning the print time plus one burst of tail, clipped to [-1, 1]
    """
    if not sample_rate > 0:
        raise SignalError(f"sample rate must be > 0 Hz, got {sample_rate}")
    if model.fan_freq >= sample_rate / 2.0:
        raise SignalError(f"fan frequency {model.fan_freq} Hz is not below Nyquist ({sample_rate / 2.0} Hz)")
    if not toolpath.segments:
        raise SignalError("cannot synthesize audio for an empty toolpath")

    duration = toolpath.duration + model.spike_duration
    n = int(math.ceil(duration * sample_rate))
    t = np.arange(n) / sample_rate
    x = position_at(toolpath, t)[:, 0]
    samples = model.fan_amplitude(x) * np.sin(2.0 * np.pi * model.fan_freq * t)

    burst_length = int(round(model.spike_duration * sample_rate))
    tb = np.arange(burst_length) / sample_rate
    burst = model.spike_amp * np.exp(-tb / (model.spike_duration / 5.0)) * np.sin(2.0 * np.pi * model.spike_center * tb)
    events = turn_events(toolpath, model)
    for onset in events:
        i0 = int(math.ceil(onset * sample_rate))
        i1 = min(n, i0 + burst_length)
        samples[i0:i1] += burst[: i1 - i0]

    if model.noise_sigma > 0:
        rng = Generator(PCG64(seed))
        samples += rng.normal(0.0, model.noise_sigma, n)

    logger.info(f"synthesized {duration:.2f} s of audio with {len(events)} stepper bursts")
    return AudioBuffer(np.clip(samples, -1.0, 1.0), sample_rate)
