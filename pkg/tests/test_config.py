import argparse
import json

import pytest

from stealth_print.acoustics import SpikeParams
from stealth_print.config import DEFAULT_RESOLUTION, DEFAULT_SEED, Params, RunConfig, load_params
from stealth_print.errors import ConfigError
from stealth_print.optim import OptimizerParams


def _params_file(tmp_path, payload):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(payload))
    return path


def test_no_file_gives_defaults():
    assert load_params(None) == Params()


def test_overrides_touch_only_named_fields(tmp_path):
    params = load_params(_params_file(tmp_path, {"optimizer": {"stop": 300}, "spikes": {"band": [200, 500]}}))
    assert params.optimizer == OptimizerParams(stop=300)
    assert params.spikes.band == (200.0, 500.0)
    assert params.spikes.threshold == SpikeParams().threshold
    assert params.acoustic == Params().acoustic


@pytest.mark.parametrize(
    "payload, match",
    [
        ({"solver": {}}, "unknown sections"),
        ({"optimizer": {"budget": 3}}, "unknown optimizer keys"),
        ({"shm": 3}, "must be an object"),
        ([1, 2], "expected a JSON object"),
        ({"spikes": {"threshold": 2.0}}, "threshold"),
        ({"optimizer": {"min_s": "two"}}, "invalid optimizer parameters"),
    ],
)
def test_rejected_parameter_files(tmp_path, payload, match):
    with pytest.raises(ConfigError, match=match):
        load_params(_params_file(tmp_path, payload))


def test_unreadable_parameter_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text("{optimizer: ")
    with pytest.raises(ConfigError, match="unreadable"):
        load_params(path)


def test_run_config_defaults():
    config = RunConfig.from_args(argparse.Namespace(command="synthesize"))
    assert (config.seed, config.resolution, config.params) == (DEFAULT_SEED, DEFAULT_RESOLUTION, Params())


def test_missing_input_is_rejected(tmp_path):
    args = argparse.Namespace(command="synthesize", input=tmp_path / "missing.gcode")
    with pytest.raises(ConfigError, match="no such file"):
        RunConfig.from_args(args)


def test_output_directory_must_exist(tmp_path):
    source = tmp_path / "in.gcode"
    source.write_text("G28\n")
    args = argparse.Namespace(command="synthesize", input=source, out=tmp_path / "nowhere" / "out.wav")
    with pytest.raises(ConfigError, match="does not exist"):
        RunConfig.from_args(args)


def test_resolution_must_be_positive():
    with pytest.raises(ConfigError, match="resolution"):
        RunConfig.from_args(argparse.Namespace(command="evaluate", resolution=0.0))


def test_params_are_loaded_from_args(tmp_path):
    params = _params_file(tmp_path, {"reconstruction": {"y_step": 1.5}})
    args = argparse.Namespace(command="attack", seed=7, params=params)
    config = RunConfig.from_args(args)
    assert config.seed == 7
    assert config.params.reconstruction.y_step == 1.5
    assert config.options is args
