import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Callable, Sequence

import loguru

from stealth_print.acoustics import (
    DEFAULT_SAMPLE_RATE,
    detect_spikes,
    evaluate_against_boundary,
    evaluate_reconstruction,
    fit_energy_line,
    load_energy_line,
    load_reconstruction,
    predict_positions,
    read_wav,
    reconstruct_from_spikes,
    save_energy_line,
    save_reconstruction,
    save_series,
    save_spectrogram,
    spectrogram,
    synthesize_audio,
    turn_events,
    write_wav,
)
from stealth_print.config import DEFAULT_RESOLUTION, DEFAULT_SEED, RunConfig
from stealth_print.errors import ConfigError, FileFormatError, SignalError, StealthPrintError, UsageError
from stealth_print.gcode import print_time, read_gcode, to_toolpath, write_gcode
from stealth_print.geometry import binary_fill, footprint
from stealth_print.optim import mask_to_boundary, optimize_obfuscation, save_trace
from stealth_print.shm import (
    added_path_length,
    apply_shm,
    load_boundaries,
    naive_boundaries,
    overhead_report,
    save_boundaries,
)
from stealth_print.sync import SimulatedMicrophone, open_port, save_sync_log, stream_with_sync

logger = loguru.logger

LOG_LEVEL_ENV = "STEALTH_PRINT_LOG_LEVEL"
DEFAULT_FEEDRATES = "300,500,1200"
# room around the footprint for the closing and the boundary dilation, mm
FOOTPRINT_PADDING = 2.0


def configure_logging() -> None:
    level = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    logger.remove()
    try:
        logger.add(sys.stderr, level=level)
    except ValueError as error:
        raise ConfigError(f"{LOG_LEVEL_ENV}: unknown log level {level!r}") from error


def _either(config: RunConfig, first: str, second: str) -> str:
    """Name of the one option of a required pair that was given."""
    given = [name for name in (first, second) if getattr(config.options, name) is not None]
    if len(given) != 1:
        raise ConfigError(f"give exactly one of {first} and {second}")
    return given[0]


def _given(args: argparse.Namespace, *names: str) -> dict:
    return {name: getattr(args, name) for name in names if getattr(args, name) is not None}


def cmd_obfuscate(config: RunConfig) -> dict:
    args = config.options
    program = read_gcode(args.input)
    toolpath = to_toolpath(program)
    shm = config.params.shm if args.margin is None else replace(config.params.shm, margin=args.margin)
    boundary_out = args.boundary_out or args.out.with_suffix(".boundary.json")
    summary: dict = {"mode": args.mode, "added_path_mm": 0.0, "added_time_s_at_input_feedrate": 0.0}

    if not any(segment.xy_length > 0 for segment in toolpath.segments):
        warning = "program has no XY motion; written unchanged"
        logger.warning(warning)
        write_gcode(program, args.out)
        return {**summary, "percent_overhead": 0.0, "extensions": 0, "warnings": [warning]}

    if args.mode == "naive":
        boundaries = naive_boundaries(toolpath, shm.margin)
    else:
        optimizer = replace(config.params.optimizer, seed=config.seed)
        extruding = toolpath.extruding() or list(toolpath.segments)
        mask = binary_fill(footprint(extruding, config.resolution, FOOTPRINT_PADDING, optimizer.closing_radius))
        result = optimize_obfuscation(mask, optimizer)
        boundary = mask_to_boundary(result, toolpath=toolpath)
        boundaries = {layer: boundary for layer in toolpath.layers()}
        trace_out = args.trace_out or args.out.with_suffix(".trace.csv")
        save_trace(result.trace, trace_out)
        summary.update(optimizer_mode=result.mode, selected_iteration=result.optimized_index)

    shm_result = apply_shm(program, boundaries, shm)
    write_gcode(shm_result.program, args.out)
    save_boundaries(boundaries, boundary_out)

    obfuscated = to_toolpath(shm_result.program)
    t_orig, t_obf = print_time(toolpath), print_time(obfuscated)
    summary.update(
        added_path_mm=round(added_path_length(toolpath, obfuscated), 6),
        added_time_s_at_input_feedrate=round(t_obf - t_orig, 6),
        percent_overhead=round(100.0 * (t_obf - t_orig) / t_orig, 6) if t_orig > 0 else 0.0,
        extensions=len(shm_result.extensions),
        warnings=shm_result.warnings,
    )
    return summary


def cmd_attack(config: RunConfig) -> dict:
    args = config.options
    source = _either(config, "audio", "simulate")
    if (args.energy_line is None) != (args.positions_out is None):
        raise ConfigError("--energy-line and --positions-out go together")
    recon_params = replace(config.params.reconstruction, **_given(args, "speed", "y_step"))
    spike_params = replace(config.params.spikes, **_given(args, "threshold", "min_separation"))

    toolpath = None
    if source == "simulate":
        toolpath = to_toolpath(read_gcode(args.simulate))
        audio = synthesize_audio(toolpath, config.params.acoustic, seed=config.seed)
        if args.wav_out is not None:
            write_wav(audio, args.wav_out)
    else:
        audio = read_wav(args.audio)

    spikes = detect_spikes(audio, spike_params)
    if len(spikes) == 0:
        raise SignalError("no spikes detected; lower --threshold or --min-separation")
    recon = reconstruct_from_spikes(
        spikes,
        recon_params.speed,
        recon_params.y_step,
        recon_params.sg_window,
        recon_params.sg_polyorder,
        recon_params.first_direction,
        stray_ratio=recon_params.stray_ratio,
    )
    save_reconstruction(recon, args.out)
    summary: dict = {"audio_s": round(audio.duration, 6), "spikes": len(spikes), "turn_points": len(recon)}

    if args.energy_line is not None:
        positions = predict_positions(audio, load_energy_line(args.energy_line))
        save_series(positions["t_seconds"], positions["value"], args.positions_out)
        summary["positions"] = len(positions)
    if toolpath is not None:
        summary["score"] = evaluate_reconstruction(recon, toolpath, config.resolution).as_dict()
    return summary


def cmd_synthesize(config: RunConfig) -> dict:
    args = config.options
    toolpath = to_toolpath(read_gcode(args.input))
    audio = synthesize_audio(toolpath, config.params.acoustic, args.sample_rate, config.seed)
    write_wav(audio, args.out)
    return {
        "duration_s": round(audio.duration, 6),
        "sample_rate": audio.sample_rate,
        "direction_changes": len(turn_events(toolpath, config.params.acoustic)),
    }


def cmd_calibrate(config: RunConfig) -> dict:
    args = config.options
    line = fit_energy_line(read_wav(args.input), args.x0, args.x1, args.speed)
    save_energy_line(line, args.out)
    return asdict(line)


def cmd_evaluate(config: RunConfig) -> dict:
    args = config.options
    recon = load_reconstruction(args.recon)
    if _either(config, "gcode", "boundary") == "gcode":
        toolpath = to_toolpath(read_gcode(args.gcode))
        return {"reference": "gcode", **evaluate_reconstruction(recon, toolpath, config.resolution).as_dict()}
    boundary = load_boundaries(args.boundary)
    if isinstance(boundary, dict):
        if not boundary:
            raise FileFormatError(f"{args.boundary}: no layers")
        boundary = boundary[min(boundary)]
    return {"reference": "boundary", **evaluate_against_boundary(recon, boundary, config.resolution).as_dict()}


def cmd_spectrogram(config: RunConfig) -> dict:
    args = config.options
    spec = spectrogram(read_wav(args.input), args.fft_size, args.hop)
    save_spectrogram(spec, args.out)
    return {"frames": len(spec.times), "bins": len(spec.freqs), "dominant_hz": round(spec.dominant_frequency(), 3)}


def _feedrates(text: str) -> list[float]:
    try:
        return [float(value) for value in text.split(",")]
    except ValueError as error:
        raise ConfigError(f"--feedrates expects comma-separated numbers, got {text!r}") from error


def cmd_report_time(config: RunConfig) -> dict:
    args = config.options
    original = to_toolpath(read_gcode(args.original))
    obfuscated = to_toolpath(read_gcode(args.obfuscated))
    table = overhead_report(original, obfuscated, _feedrates(args.feedrates))
    table.to_csv(args.out, index=False, lineterminator="\n")
    return {"rows": len(table), "percent": [round(p, 6) for p in table["percent"]]}


def cmd_sync(config: RunConfig) -> dict:
    args = config.options
    program = read_gcode(args.input)
    printer = open_port(args.port)
    microphone = SimulatedMicrophone(printer, config.params.acoustic, seed=config.seed)
    result = stream_with_sync(program, printer, microphone)
    log_path, wav_path = Path(f"{args.out}.csv"), Path(f"{args.out}.wav")
    save_sync_log(result.log, log_path)
    write_wav(result.audio, wav_path)
    return {
        "lines_sent": result.lines_sent,
        "positions": len(result.log),
        "audio_s": round(result.audio.duration, 6),
        "log": str(log_path),
        "audio": str(wav_path),
    }


class _Parser(argparse.ArgumentParser):
    """Reports usage errors through the JSON diagnostic instead of exiting with status 2."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--seed", type=int, default=DEFAULT_SEED, help=f"Seed of every random stream (default: {DEFAULT_SEED})"
    )
    common.add_argument("--params", type=Path, help="JSON file overriding operation parameters")
    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION, help="Raster cell size in mm")

    parser = _Parser(
        prog="stealth-print",
        description="Obfuscate G-code against acoustic side channels, and run the attack that tests it",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable[[RunConfig], dict], summary: str, parents=(common,)):
        sub = subparsers.add_parser(name, help=summary, parents=list(parents))
        sub.set_defaults(handler=handler)
        return sub

    sub = add("obfuscate", cmd_obfuscate, "Extend every motion to an obfuscation boundary", (common, grid))
    sub.add_argument("input", type=Path, help="G-code to protect")
    sub.add_argument("--out", type=Path, required=True, help="Obfuscated G-code")
    sub.add_argument("--mode", choices=["naive", "optimized"], default="naive", help="Boundary kind (default: naive)")
    sub.add_argument("--margin", type=float, help="mm around each layer's bounding box in naive mode")
    sub.add_argument("--boundary-out", type=Path, help="Boundary JSON (default: OUT.boundary.json)")
    sub.add_argument("--trace-out", type=Path, help="Optimizer trace CSV (default: OUT.trace.csv)")

    sub = add("attack", cmd_attack, "Reconstruct the toolpath from printer audio", (common, grid))
    sub.add_argument("audio", type=Path, nargs="?", help="Recorded WAV")
    sub.add_argument("--simulate", type=Path, help="Synthesize the audio of this G-code instead")
    sub.add_argument("--out", type=Path, required=True, help="Reconstructed turn points CSV")
    sub.add_argument("--wav-out", type=Path, help="Where to keep the synthesized audio")
    sub.add_argument("--energy-line", type=Path, help="Calibration JSON for energy localization")
    sub.add_argument("--positions-out", type=Path, help="Energy-based x positions CSV")
    sub.add_argument("--speed", type=float, help="Assumed feedrate in mm/min")
    sub.add_argument("--y-step", type=float, help="mm between rows")
    sub.add_argument("--threshold", type=float, help="Spike height as a fraction of the envelope maximum")
    sub.add_argument("--min-separation", type=float, help="s between two spikes")

    sub = add("synthesize", cmd_synthesize, "Synthesize printer audio for a G-code file")
    sub.add_argument("input", type=Path, help="G-code to play")
    sub.add_argument("--out", type=Path, required=True, help="Output WAV")
    sub.add_argument("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE, help="Hz")

    sub = add("calibrate", cmd_calibrate, "Fit the energy-distance line on a sweep recording")
    sub.add_argument("input", type=Path, help="WAV of one constant-speed X sweep")
    sub.add_argument("--x0", type=float, required=True, help="Sweep start, mm")
    sub.add_argument("--x1", type=float, required=True, help="Sweep end, mm")
    sub.add_argument("--speed", type=float, required=True, help="Sweep feedrate, mm/min")
    sub.add_argument("--out", type=Path, required=True, help="Energy line JSON")

    sub = add("evaluate", cmd_evaluate, "Score a reconstruction against a part or a boundary", (common, grid))
    sub.add_argument("recon", type=Path, help="Reconstructed turn points CSV")
    sub.add_argument("--gcode", type=Path, help="Original G-code")
    sub.add_argument("--boundary", type=Path, help="Boundary JSON")

    sub = add("spectrogram", cmd_spectrogram, "Short-time magnitude spectrum of a recording")
    sub.add_argument("input", type=Path, help="WAV to analyse")
    sub.add_argument("--out", type=Path, required=True, help="Spectrogram CSV")
    sub.add_argument("--fft-size", type=int, default=1024, help="Samples per frame (default: 1024)")
    sub.add_argument("--hop", type=int, default=256, help="Samples between frames (default: 256)")

    sub = add("report-time", cmd_report_time, "Print-time overhead at uniform feedrates")
    sub.add_argument("original", type=Path, help="Original G-code")
    sub.add_argument("obfuscated", type=Path, help="Obfuscated G-code")
    sub.add_argument("--feedrates", default=DEFAULT_FEEDRATES, help=f"mm/min list (default: {DEFAULT_FEEDRATES})")
    sub.add_argument("--out", type=Path, required=True, help="Overhead table CSV")

    sub = add("sync", cmd_sync, "Stream G-code to a printer while recording")
    sub.add_argument("input", type=Path, help="G-code to stream")
    sub.add_argument("--port", default="sim://virtual", help="sim://virtual or sim://realtime")
    sub.add_argument("--out", type=Path, required=True, help="Prefix of the PREFIX.csv log and PREFIX.wav audio")
    return parser


def _fail(diagnostic: dict) -> int:
    print(json.dumps(diagnostic, sort_keys=True), file=sys.stderr)
    return 1


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging()
        config = RunConfig.from_args(args)
        summary = args.handler(config)
    except StealthPrintError as error:
        return _fail({"error": error.code, "message": str(error), **error.context()})
    except OSError as error:
        logger.opt(exception=error).debug("i/o failure")
        return _fail({"error": "io_error", "message": str(error)})
    except Exception as error:
        logger.opt(exception=error).debug("unexpected failure")
        return _fail({"error": "internal_error", "message": f"{type(error).__name__}: {error}"})
    print(json.dumps({"command": config.command, "seed": config.seed, **summary}, sort_keys=True))
    return 0
