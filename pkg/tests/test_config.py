import json

import pytest

from conftest import tiny_architecture
from fmim.config import default_config, dump_config, get_preset, load_config
from fmim.errors import ConfigError


def test_presets_validate():
    for name in ("desk", "reference"):
        preset = get_preset(name)
        assert preset.pipeline.raster.frames_per_block == preset.architecture.input_shape[0]
    with pytest.raises(ConfigError):
        get_preset("imaginary")


def test_default_config():
    cfg = default_config("desk", seed=9)
    assert cfg.seed == 9
    assert cfg.train.seed == 9
    assert cfg.train.learning_rate == 0.001


def test_load_applies_overrides(tmp_path):
    doc = {
        "preset": "desk",
        "seed": 4,
        "train": {"iterations": 50, "batch_size": 2},
        "pipeline": {"stride_s": 30.0, "raster": {"splat_radius": 1.5}},
        "synth": {"fps": 1.0},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    cfg = load_config(path)
    assert cfg.train.iterations == 50
    assert cfg.train.batch_size == 2
    assert cfg.preset.pipeline.stride_s == 30.0
    assert cfg.preset.pipeline.raster.splat_radius == 1.5
    assert cfg.preset.synth.fps == 1.0
    # untouched values come from the preset
    assert cfg.preset.pipeline.window_s == 300.0


def test_architecture_override_must_match_raster(tmp_path):
    doc = {"preset": "desk", "architecture": tiny_architecture().to_dict()}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_config(path)  # tiny arch input does not match desk raster


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"preset": "desk", "spelling-mistake": 1}))
    with pytest.raises(ConfigError):
        load_config(path)


def test_bad_json_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_dump_load_roundtrip(tmp_path):
    cfg = default_config("desk", seed=3)
    path = tmp_path / "c.json"
    path.write_text(dump_config(cfg))
    back = load_config(path)
    assert back.preset.pipeline == cfg.preset.pipeline
    assert back.train == cfg.train
    assert back.seed == cfg.seed
