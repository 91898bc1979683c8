"""Global configuration: presets plus JSON config files.

A preset bundles an architecture with the clip/raster settings that
feed it and the synthetic-corpus defaults that match. The JSON config
file can override any scalar; command-line flags override the file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from .clipper import RasterConfig
from .errors import ConfigError, IoFailure
from .model import (
    ARCHITECTURE_PRESETS,
    ArchitectureConfig,
    PipelineConfig,
    TrainConfig,
    walk_shapes,
)


@dataclass(frozen=True)
class SynthConfig:
    fps: float
    duration_s: float
    noise_sigma_max: float = 0.002


@dataclass(frozen=True)
class Preset:
    name: str
    architecture: ArchitectureConfig
    pipeline: PipelineConfig
    synth: SynthConfig


def _desk_preset() -> Preset:
    return Preset(
        name="desk",
        architecture=ARCHITECTURE_PRESETS["desk"](),
        pipeline=PipelineConfig(
            window_s=300.0,
            stride_s=60.0,
            raster=RasterConfig(height=64, width=64, channels=1,
                                frames_per_block=8, block_s=100.0,
                                splat_radius=1.0, draw_edges=False),
            # synthetic faces are rigid templates, so eye-axis alignment
            # would strip most of the head-motion signal the synthetic
            # labels encode; the reference preset keeps alignment on
            canonicalize=False,
        ),
        synth=SynthConfig(fps=0.5, duration_s=300.0),
    )


def _reference_preset() -> Preset:
    return Preset(
        name="reference",
        architecture=ARCHITECTURE_PRESETS["reference"](),
        pipeline=PipelineConfig(
            window_s=300.0,
            stride_s=60.0,
            raster=RasterConfig(height=640, width=640, channels=3,
                                frames_per_block=30, block_s=1.0,
                                splat_radius=2.0, draw_edges=True),
            canonicalize=True,
        ),
        synth=SynthConfig(fps=30.0, duration_s=900.0),
    )


_PRESETS = {
    "desk": _desk_preset,
    "reference": _reference_preset,
}


def get_preset(name: str) -> Preset:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(_PRESETS))}")
    return _PRESETS[name]()


@dataclass(frozen=True)
class GlobalConfig:
    preset: Preset
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def validate(self):
        walk_shapes(self.preset.architecture)
        self.train.validate()
        raster = self.preset.pipeline.raster
        if raster.frames_per_block != self.preset.architecture.input_shape[0]:
            raise ConfigError("raster frames_per_block must match the architecture block length")
        if (raster.height, raster.width, raster.channels) != self.preset.architecture.input_shape[1:]:
            raise ConfigError("raster resolution/channels must match the architecture input")


def default_config(preset_name: str = "desk", seed: int = 0) -> GlobalConfig:
    cfg = GlobalConfig(preset=get_preset(preset_name), seed=seed,
                       train=TrainConfig(seed=seed))
    cfg.validate()
    return cfg


def load_config(path) -> GlobalConfig:
    """Build a config from JSON: preset name plus scalar overrides."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    known = {"preset", "seed", "train", "pipeline", "synth", "architecture"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    preset = get_preset(raw.get("preset", "desk"))
    if "architecture" in raw:
        try:
            arch = ArchitectureConfig.from_dict(raw["architecture"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad architecture block: {exc}") from exc
        preset = Preset(preset.name, arch, preset.pipeline, preset.synth)
    seed = int(raw.get("seed", 0))
    train_kwargs = dict(raw.get("train", {}))
    if "split" in train_kwargs:
        train_kwargs["split"] = tuple(train_kwargs["split"])
    train = replace(TrainConfig(seed=seed), **train_kwargs)
    pipe_over = dict(raw.get("pipeline", {}))
    raster_over = pipe_over.pop("raster", {})
    pipeline = replace(preset.pipeline, **pipe_over)
    if raster_over:
        pipeline = replace(pipeline, raster=replace(pipeline.raster, **raster_over))
    synth_over = dict(raw.get("synth", {}))
    try:
        synth = replace(preset.synth, **synth_over)
    except TypeError as exc:
        raise ConfigError(f"bad synth block: {exc}") from exc
    cfg = GlobalConfig(preset=Preset(preset.name, preset.architecture, pipeline, synth),
                       train=train, seed=seed)
    try:
        cfg.validate()
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return cfg


def dump_config(cfg: GlobalConfig) -> str:
    doc = {
        "preset": cfg.preset.name,
        "seed": cfg.seed,
        "train": asdict(cfg.train),
        "pipeline": asdict(cfg.preset.pipeline),
        "synth": asdict(cfg.preset.synth),
    }
    return json.dumps(doc, indent=2, sort_keys=True)
