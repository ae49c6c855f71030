from .audio import (
    DEFAULT_SAMPLE_RATE,
    AudioBuffer,
    load_path,
    load_series,
    read_table,
    read_wav,
    save_path,
    save_series,
    write_wav,
)
from .energy import (
    EnergyLine,
    fit_energy_line,
    load_energy_line,
    predict_positions,
    save_energy_line,
    windowed_energy,
)
from .evaluation import (
    ReconstructionScore,
    evaluate_against_boundary,
    evaluate_against_mask,
    evaluate_reconstruction,
    fill_reconstruction,
    iou,
    reconstruction_polygon,
    reference_mask,
)
from .filters import bandpass, butterworth_filter, design_butterworth, highpass
from .spectrum import Spectrogram, save_spectrogram, spectrogram
from .spikes import (
    ReconstructedPath,
    ReconstructionParams,
    SpikeParams,
    SpikeTrain,
    detect_spikes,
    envelope,
    load_reconstruction,
    load_spike_train,
    reconstruct_from_spikes,
    save_reconstruction,
    save_spike_train,
    smooth_intervals,
)
from .synthesis import AcousticModel, position_at, synthesize_audio, turn_events

__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "AcousticModel",
    "AudioBuffer",
    "EnergyLine",
    "ReconstructedPath",
    "ReconstructionParams",
    "ReconstructionScore",
    "Spectrogram",
    "SpikeParams",
    "SpikeTrain",
    "bandpass",
    "butterworth_filter",
    "design_butterworth",
    "detect_spikes",
    "envelope",
    "evaluate_against_boundary",
    "evaluate_against_mask",
    "evaluate_reconstruction",
    "fill_reconstruction",
    "fit_energy_line",
    "highpass",
    "iou",
    "load_energy_line",
    "load_path",
    "load_reconstruction",
    "load_series",
    "load_spike_train",
    "position_at",
    "predict_positions",
    "read_table",
    "read_wav",
    "reconstruct_from_spikes",
    "reconstruction_polygon",
    "reference_mask",
    "save_energy_line",
    "save_path",
    "save_reconstruction",
    "save_series",
    "save_spectrogram",
    "save_spike_train",
    "smooth_intervals",
    "spectrogram",
    "synthesize_audio",
    "turn_events",
    "windowed_energy",
    "write_wav",
]
