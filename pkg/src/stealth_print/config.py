import argparse
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from stealth_print.acoustics import AcousticModel, ReconstructionParams, SpikeParams
from stealth_print.errors import ConfigError
from stealth_print.optim import OptimizerParams
from stealth_print.shm import ShmConfig

DEFAULT_SEED = 42
DEFAULT_RESOLUTION = 0.5

# argparse destinations naming files that must exist / files that will be written
INPUT_ARGS = (
    "input",
    "original",
    "obfuscated",
    "audio",
    "simulate",
    "recon",
    "gcode",
    "boundary",
    "energy_line",
    "params",
)
OUTPUT_ARGS = ("out", "boundary_out", "trace_out", "wav_out", "positions_out")


@dataclass(frozen=True)
class Params:
    """Parameter sets of every configurable operation, with their documented defaults."""

    optimizer: OptimizerParams = field(default_factory=OptimizerParams)
    acoustic: AcousticModel = field(default_factory=AcousticModel)
    shm: ShmConfig = field(default_factory=ShmConfig)
    spikes: SpikeParams = field(default_factory=SpikeParams)
    reconstruction: ReconstructionParams = field(default_factory=ReconstructionParams)


def load_params(path: Path | None) -> Params:
    """
    Read a parameter override file.

    The JSON object may hold the sections optimizer, acoustic, shm, spikes and reconstruction;
    each maps field names to values. Absent sections and fields keep their defaults.
    """
    params = Params()
    if path is None:
        return params
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as error:
        raise ConfigError(f"{path}: unreadable parameter file ({error})") from error
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a JSON object")

    sections = {f.name for f in fields(Params)}
    unknown = set(payload) - sections
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}; expected {sorted(sections)}")
    overrides = {}
    for name, values in payload.items():
        default = getattr(params, name)
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: section {name!r} must be an object")
        known = {f.name for f in fields(default)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"{path}: unknown {name} keys {sorted(unknown)}")
        try:
            overrides[name] = replace(default, **values)
        except (TypeError, ValueError) as error:
            raise ConfigError(f"{path}: invalid {name} parameters ({error})") from error
    return replace(params, **overrides)


@dataclass(frozen=True)
class RunConfig:
    """
    Validated inputs of one CLI invocation.

    Attributes
    ----------
    - command: subcommand name
    - seed: seed of every random stream
    - resolution: mm/cell of every raster
    - params: operation parameters after the --params overrides
    - options: the parsed arguments
    """

    command: str
    seed: int = DEFAULT_SEED
    resolution: float = DEFAULT_RESOLUTION
    params: Params = field(default_factory=Params)
    options: argparse.Namespace = field(default_factory=argparse.Namespace)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        """Check every path before anything is computed: inputs must exist, outputs need an existing directory."""
        for name in INPUT_ARGS:
            value = getattr(args, name, None)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"{name}: no such file {value}")
        for name in OUTPUT_ARGS:
            value = getattr(args, name, None)
            if value is not None and not Path(value).resolve().parent.is_dir():
                raise ConfigError(f"{name}: directory of {value} does not exist")
        resolution = getattr(args, "resolution", None)
        resolution = DEFAULT_RESOLUTION if resolution is None else resolution
        if not resolution > 0:
            raise ConfigError(f"resolution must be > 0 mm/cell, got {resolution}")
        params = load_params(getattr(args, "params", None))
        return cls(args.command, getattr(args, "seed", DEFAULT_SEED), resolution, params, args)
