"""Clip-regression model: 3D-CNN encoder, LSTM over blocks, dense head.

One scalar-output model is trained per score dimension. A clip tensor
holds B blocks of frames; each block is encoded by the convolutional
stack into an embedding, a dense bridge feeds the LSTM across blocks,
and the final hidden state drives a four-layer regression head whose
output is mapped into the score range by 1 + 4 * sigmoid(z), keeping
every prediction strictly inside [1, 5].

The reference preset mirrors the published layer walk wherever that
walk is internally coherent (pooling layers do not change channel
counts here; channel growth happens in the convolutions) and matches
the printed milestones: 320x320x32 after the first convolution,
10x10x256 before padding, 30x30x30 padded, 8x8x512, 2x2x2048, a final
1x1 convolution to 4096, LSTM width 512, and a head ending at 128.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import engine
from .clipper import ClipTensor, RasterConfig, segment_clips, rasterize_clip
from .engine import Adam, LSTMParams, Tensor
from .errors import (
    ConfigError,
    ConfigShapeError,
    CorruptCheckpoint,
    EmptySplit,
    InsufficientData,
    IoFailure,
    ShapeMismatch,
    VersionMismatch,
)
from .geometry import LEFT_EYE_OUTER, RIGHT_EYE_OUTER, canonicalize_sequence
from .landmark_io import IM_DIMENSIONS, DatasetManifest, IMScores, read_landmark_file
from .stats import MetricReport, metric_report
from .synthgen import largest_remainder_split

CHECKPOINT_MAGIC = b"FMIM"
CHECKPOINT_VERSION = 1
CHECKPOINT_TRAILER = b"KMIF"


# -- architecture ----------------------------------------------------------


@dataclass(frozen=True)
class ConvStage:
    name: str
    out_channels: int
    kernel: tuple[int, int, int] = (3, 3, 3)
    stride: tuple[int, int, int] = (1, 1, 1)
    padding: tuple[int, int, int] = (0, 0, 0)
    kind: str = "conv"


@dataclass(frozen=True)
class PoolStage:
    name: str
    window: tuple[int, int, int]
    stride: tuple[int, int, int] | None = None
    mode: str = "max"
    kind: str = "pool"


@dataclass(frozen=True)
class PadStage:
    name: str
    amounts: tuple[int, int, int]
    kind: str = "pad"


@dataclass(frozen=True)
class ArchitectureConfig:
    name: str
    input_shape: tuple[int, int, int, int]  # per-block (T, H, W, C)
    stages: tuple
    embedding_channels: int
    bridge_width: int
    lstm_hidden: int
    head_widths: tuple[int, int, int, int]
    dropout_rate: float = 0.5
    output_low: float = 1.0
    output_high: float = 5.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureConfig":
        stages = []
        for s in d["stages"]:
            kind = s["kind"]
            s = {k: (tuple(v) if isinstance(v, list) else v) for k, v in s.items() if k != "kind"}
            if kind == "conv":
                stages.append(ConvStage(**s))
            elif kind == "pool":
                stages.append(PoolStage(**s))
            elif kind == "pad":
                stages.append(PadStage(**s))
            else:
                raise ConfigError(f"unknown stage kind {kind!r}")
        return cls(
            name=d["name"],
            input_shape=tuple(d["input_shape"]),
            stages=tuple(stages),
            embedding_channels=d["embedding_channels"],
            bridge_width=d["bridge_width"],
            lstm_hidden=d["lstm_hidden"],
            head_widths=tuple(d["head_widths"]),
            dropout_rate=d["dropout_rate"],
            output_low=d["output_low"],
            output_high=d["output_high"],
        )


def _conv_out(dim: int, k: int, s: int, p: int) -> int:
    return (dim + 2 * p - k) // s + 1


def walk_shapes(cfg: ArchitectureConfig) -> list[tuple[str, tuple]]:
    """Shape-check the layer chain end to end; error names the first bad layer."""
    t, h, w, c = cfg.input_shape
    if min(t, h, w, c) < 1:
        raise ConfigShapeError(f"input: invalid shape {cfg.input_shape}")
    shapes = [("input", (t, h, w, c))]
    for st in cfg.stages:
        if st.kind == "conv":
            dims = []
            for d, k, s, p in zip((t, h, w), st.kernel, st.stride, st.padding):
                if k > d + 2 * p or s < 1:
                    raise ConfigShapeError(f"{st.name}: kernel {st.kernel} stride {st.stride} "
                                           f"does not fit {(t, h, w)}")
                dims.append(_conv_out(d, k, s, p))
            t, h, w = dims
            c = st.out_channels
        elif st.kind == "pool":
            stride = st.window if st.stride is None else st.stride
            dims = []
            for d, win, s in zip((t, h, w), st.window, stride):
                if win > d:
                    raise ConfigShapeError(f"{st.name}: window {st.window} does not fit {(t, h, w)}")
                dims.append((d - win) // s + 1)
            t, h, w = dims
        elif st.kind == "pad":
            t, h, w = (d + 2 * a for d, a in zip((t, h, w), st.amounts))
        else:
            raise ConfigShapeError(f"{st.name}: unknown stage kind {st.kind!r}")
        if min(t, h, w) < 1:
            raise ConfigShapeError(f"{st.name}: output collapsed to {(t, h, w, c)}")
        shapes.append((st.name, (t, h, w, c)))
    shapes.append(("embedding_conv", (t, h, w, cfg.embedding_channels)))
    shapes.append(("embedding", (cfg.embedding_channels,)))
    shapes.append(("bridge", (cfg.bridge_width,)))
    shapes.append(("lstm", (cfg.lstm_hidden,)))
    prev = cfg.lstm_hidden
    for i, width in enumerate(cfg.head_widths, start=1):
        if width < 1 or prev < 1:
            raise ConfigShapeError(f"dense_{i}: invalid width {width}")
        shapes.append((f"dense_{i}", (width,)))
        prev = width
    shapes.append(("output", (1,)))
    return shapes


def reference_architecture() -> ArchitectureConfig:
    return ArchitectureConfig(
        name="reference",
        input_shape=(30, 640, 640, 3),
        stages=(
            ConvStage("conv3d_1", 32, stride=(1, 2, 2), padding=(1, 1, 1)),
            PoolStage("pool_1", (1, 2, 2)),
            ConvStage("conv3d_2", 64, stride=(1, 2, 2), padding=(1, 1, 1)),
            PoolStage("pool_2", (1, 2, 2)),
            ConvStage("conv3d_3", 256, stride=(1, 2, 2), padding=(1, 1, 1)),
            PoolStage("pool_3", (1, 2, 2)),
            PadStage("padding", (0, 10, 10)),
            ConvStage("conv3d_4", 512, stride=(1, 4, 4), padding=(1, 1, 1)),
            ConvStage("conv3d_5", 2048, stride=(1, 2, 2), padding=(1, 1, 1)),
            PoolStage("pool_4", (1, 2, 2)),
        ),
        embedding_channels=4096,
        bridge_width=512,
        lstm_hidden=512,
        head_widths=(512, 384, 256, 128),
    )


def desk_architecture() -> ArchitectureConfig:
    return ArchitectureConfig(
        name="desk",
        input_shape=(8, 64, 64, 1),
        stages=(
            ConvStage("conv3d_1", 8, stride=(1, 2, 2), padding=(1, 1, 1)),
            PoolStage("pool_1", (2, 2, 2)),
            ConvStage("conv3d_2", 16, stride=(1, 2, 2), padding=(1, 1, 1)),
            PoolStage("pool_2", (1, 2, 2)),
            PadStage("padding", (0, 1, 1)),
            ConvStage("conv3d_3", 32, stride=(1, 1, 1), padding=(0, 0, 0)),
            # full-map collapse keeps spatial identity in the embedding;
            # a global average would dilute small localized motion
            ConvStage("conv3d_4", 64, kernel=(2, 4, 4), stride=(1, 1, 1),
                      padding=(0, 0, 0)),
        ),
        embedding_channels=64,
        bridge_width=32,
        lstm_hidden=64,
        head_widths=(64, 48, 32, 16),
    )


ARCHITECTURE_PRESETS = {
    "reference": reference_architecture,
    "desk": desk_architecture,
}


# -- training configuration -------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000
    batch_size: int = 4
    learning_rate: float = 0.001
    eval_every: int = 10
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    # small batches make the loss trajectory noisy; clipping the global
    # gradient norm keeps single outlier batches from derailing training
    grad_clip_norm: float = 5.0
    # linear learning-rate decay toward lr * lr_final_scale at the last
    # iteration; 1.0 keeps the constant rate
    lr_final_scale: float = 1.0
    # optimization restarts: retry from the next deterministic
    # initialization stream while the best validation correlation stays
    # below the gate; 1 disables retries (fixed-iteration behavior)
    restarts: int = 1
    restart_below_val_r: float = 0.85

    def validate(self):
        if self.iterations < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ConfigError("iterations, batch_size and eval_every must be positive")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if len(self.split) != 3 or any(r <= 0 for r in self.split) or abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must be positive and sum to 1, got {self.split}")
        if self.grad_clip_norm <= 0:
            raise ConfigError(f"grad_clip_norm must be positive, got {self.grad_clip_norm}")
        if not (0.0 < self.lr_final_scale <= 1.0):
            raise ConfigError(f"lr_final_scale must lie in (0, 1], got {self.lr_final_scale}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be at least 1, got {self.restarts}")


@dataclass(frozen=True)
class PipelineConfig:
    """Clip-preparation settings shared by training and evaluation."""

    window_s: float = 300.0
    stride_s: float = 60.0
    raster: RasterConfig = field(default_factory=RasterConfig)
    canonicalize: bool = True
    left_eye_index: int = LEFT_EYE_OUTER
    right_eye_index: int = RIGHT_EYE_OUTER


# -- model -------------------------------------------------------------------


class IMModel:
    """Parameter container plus forward pass for one score dimension."""

    def __init__(self, cfg: ArchitectureConfig, params: dict[str, Tensor]):
        self.cfg = cfg
        self.params = params

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        for name, p in self.params.items():
            if name not in arrays or arrays[name].shape != p.data.shape:
                raise CorruptCheckpoint(f"parameter {name} missing or misshaped")
            p.data = arrays[name].astype(np.float64).copy()

    def _encode_block(self, block: np.ndarray, mode: str, rng) -> Tensor:
        x = Tensor(block)
        for st in self.cfg.stages:
            if st.kind == "conv":
                x = engine.conv3d_relu(x, self.params[f"{st.name}.kernel"],
                                       stride=st.stride, padding=st.padding)
            elif st.kind == "pool":
                x = engine.pool3d(x, st.window, st.stride, mode=st.mode)
            else:
                x = engine.pad3d(x, st.amounts)
        x = engine.conv3d_relu(x, self.params["embedding.kernel"])
        x = engine.mean_axes(x, (0, 1, 2))
        x = engine.relu(engine.dense(x, self.params["bridge.w"], self.params["bridge.b"]))
        return x

    def forward_tensor(self, clip_data: np.ndarray, mode: str = "eval", rng=None) -> Tensor:
        """Score as a graph node (shape (1,)); mode 'train' enables dropout."""
        tb, hh, ww, cc = self.cfg.input_shape
        if clip_data.ndim != 4 or clip_data.shape[1:] != (hh, ww, cc):
            raise ShapeMismatch(f"clip shape {clip_data.shape} does not match model input "
                                f"(*, {hh}, {ww}, {cc})")
        if clip_data.shape[0] % tb != 0:
            raise ShapeMismatch(f"clip has {clip_data.shape[0]} frames, not a multiple of "
                                f"block length {tb}")
        blocks = clip_data.shape[0] // tb
        steps = [self._encode_block(clip_data[b * tb:(b + 1) * tb], mode, rng)
                 for b in range(blocks)]
        lstm = LSTMParams(self.params["lstm.w_x"], self.params["lstm.w_h"], self.params["lstm.b"])
        h = engine.lstm_sequence(steps, lstm)
        v = h
        for i in range(len(self.cfg.head_widths)):
            v = engine.relu(engine.dense(v, self.params[f"dense_{i + 1}.w"],
                                         self.params[f"dense_{i + 1}.b"]))
            v = engine.dropout(v, self.cfg.dropout_rate, mode=mode, rng=rng)
        z = engine.dense(v, self.params["output.w"], self.params["output.b"])
        # clamp the pre-activation so float64 sigmoid saturation cannot
        # push the mapped score onto the closed ends of the range
        z = engine.clip(z, -36.0, 36.0)
        span = self.cfg.output_high - self.cfg.output_low
        return engine.affine(engine.sigmoid(z), span, self.cfg.output_low)


def build_model(cfg: ArchitectureConfig, seed: int) -> IMModel:
    """Deterministic uniform fan-in initialization of the full layer stack."""
    walk_shapes(cfg)
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}

    def uniform(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    t, h, w, c = cfg.input_shape
    cin = c
    for st in cfg.stages:
        if st.kind == "conv":
            kt, kh, kw = st.kernel
            params[f"{st.name}.kernel"] = uniform((kt, kh, kw, cin, st.out_channels),
                                                  kt * kh * kw * cin)
            cin = st.out_channels
    params["embedding.kernel"] = uniform((1, 1, 1, cin, cfg.embedding_channels), cin)
    params["bridge.w"] = uniform((cfg.bridge_width, cfg.embedding_channels), cfg.embedding_channels)
    params["bridge.b"] = Tensor(np.zeros(cfg.bridge_width), requires_grad=True)
    hidden = cfg.lstm_hidden
    params["lstm.w_x"] = uniform((4 * hidden, cfg.bridge_width), cfg.bridge_width)
    params["lstm.w_h"] = uniform((4 * hidden, hidden), hidden)
    bias = np.zeros(4 * hidden)
    bias[hidden:2 * hidden] = 1.0  # forget gate starts open
    params["lstm.b"] = Tensor(bias, requires_grad=True)
    prev = hidden
    for i, width in enumerate(cfg.head_widths, start=1):
        params[f"dense_{i}.w"] = uniform((width, prev), prev)
        params[f"dense_{i}.b"] = Tensor(np.zeros(width), requires_grad=True)
        prev = width
    params["output.w"] = uniform((1, prev), prev)
    params["output.b"] = Tensor(np.zeros(1), requires_grad=True)
    return IMModel(cfg, params)


def forward(model: IMModel, clip) -> float:
    """Deterministic eval-mode score in (output_low, output_high)."""
    data = clip.data if isinstance(clip, ClipTensor) else np.asarray(clip, dtype=float)
    return float(model.forward_tensor(data, mode="eval").data[0])


# -- dataset preparation ------------------------------------------------------


@dataclass
class ClipSample:
    participant_id: str
    data: np.ndarray
    scores: IMScores


def prepare_clips(manifest: DatasetManifest, pipeline: PipelineConfig,
                  participants: list[str] | None = None) -> list[ClipSample]:
    """Read, optionally canonicalize, window and rasterize landmark files."""
    wanted = None if participants is None else set(participants)
    samples = []
    for entry in manifest.entries:
        if wanted is not None and entry.participant_id not in wanted:
            continue
        seq = read_landmark_file(manifest.resolve(entry))
        if pipeline.canonicalize:
            seq = canonicalize_sequence(seq, pipeline.left_eye_index, pipeline.right_eye_index)
        windows = segment_clips(seq.duration_s, pipeline.window_s, pipeline.stride_s,
                                participant_id=entry.participant_id)
        for win in windows:
            tensor = rasterize_clip(seq, win, pipeline.raster)
            samples.append(ClipSample(entry.participant_id, tensor.data, entry.scores))
    return samples


def split_participants(manifest: DatasetManifest, tcfg: TrainConfig) -> dict[str, list[str]]:
    """Seeded shuffle-split of non-holdout participants by the configured ratios."""
    pids = [e.participant_id for e in manifest.entries if e.split != "holdout"]
    rng = np.random.default_rng(np.random.SeedSequence((tcfg.seed, 0x51)))
    order = rng.permutation(len(pids))
    n_train, n_val, n_test = largest_remainder_split(len(pids), tcfg.split)
    shuffled = [pids[i] for i in order]
    return {
        "train": sorted(shuffled[:n_train]),
        "validation": sorted(shuffled[n_train:n_train + n_val]),
        "test": sorted(shuffled[n_train + n_val:]),
    }


# -- training ------------------------------------------------------------------


@dataclass
class ModelCheckpoint:
    version: int
    architecture: ArchitectureConfig
    dimension: str
    seed: int
    train_config: TrainConfig
    pipeline: PipelineConfig
    split: dict[str, list[str]]
    history: list[dict]
    best_params: dict[str, np.ndarray]
    final_params: dict[str, np.ndarray]

    def build(self, use: str = "best") -> IMModel:
        model = build_model(self.architecture, seed=self.seed)
        model.load_arrays(self.best_params if use == "best" else self.final_params)
        return model


def _train_attempt(train_clips, val_clips, labels, acfg: ArchitectureConfig,
                   tcfg: TrainConfig, seed_key: tuple, attempt: int, progress):
    """One optimization run; returns (best_key, init_seed, history, best, final)."""
    seeds = np.random.SeedSequence(seed_key).spawn(3)
    init_seed = int(np.random.default_rng(seeds[0]).integers(0, 2**31 - 1))
    batch_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])

    model = build_model(acfg, seed=init_seed)
    optimizer = Adam(model.parameters(), lr=tcfg.learning_rate)

    def validation_metrics() -> tuple[float | None, float | None]:
        """Participant-level validation MSE and correlation."""
        if not val_clips:
            return None, None
        per_pid: dict[str, list[float]] = {}
        for s in val_clips:
            per_pid.setdefault(s.participant_id, []).append(forward(model, s.data))
        pids = sorted(per_pid)
        preds = np.array([float(np.mean(per_pid[p])) for p in pids])
        targets = np.array([next(labels[id(s)] for s in val_clips if s.participant_id == p)
                            for p in pids])
        mse = float(np.mean((preds - targets) ** 2))
        if len(pids) < 2 or np.std(preds) == 0.0 or np.std(targets) == 0.0:
            return mse, None
        r = float(np.corrcoef(preds, targets)[0, 1])
        return mse, r

    def clip_gradients():
        total = 0.0
        for p in model.parameters():
            if p.grad is not None:
                total += float(np.sum(p.grad * p.grad))
        norm = math.sqrt(total)
        if norm > tcfg.grad_clip_norm:
            scale = tcfg.grad_clip_norm / norm
            for p in model.parameters():
                if p.grad is not None:
                    p.grad *= scale

    history: list[dict] = []
    best_key = (-math.inf, -math.inf)
    best_params = model.named_arrays()
    queue: list[int] = []
    for iteration in range(1, tcfg.iterations + 1):
        if len(queue) < tcfg.batch_size:
            queue.extend(batch_rng.permutation(len(train_clips)).tolist())
        batch = [train_clips[queue.pop(0)] for _ in range(tcfg.batch_size)]
        optimizer.zero_grad()
        batch_loss = 0.0
        for s in batch:
            score = model.forward_tensor(s.data, mode="train", rng=dropout_rng)
            loss = engine.mse_loss(score, np.array([labels[id(s)]]))
            batch_loss += loss.item()
            engine.affine(loss, 1.0 / tcfg.batch_size, 0.0).backward()
        clip_gradients()
        if tcfg.lr_final_scale < 1.0 and tcfg.iterations > 1:
            frac = (iteration - 1) / (tcfg.iterations - 1)
            optimizer.lr = tcfg.learning_rate * (1.0 - (1.0 - tcfg.lr_final_scale) * frac)
        optimizer.step()
        if iteration % tcfg.eval_every == 0 or iteration == tcfg.iterations:
            val_mse, val_r = validation_metrics()
            record = {"attempt": attempt,
                      "iteration": iteration,
                      "train_loss": batch_loss / tcfg.batch_size,
                      "val_mse": val_mse,
                      "val_r": val_r}
            history.append(record)
            # snapshot selection favors validation correlation; squared
            # error alone cannot separate a scale-compressed predictor
            # from a constant one
            if val_mse is not None:
                key = (val_r if val_r is not None else -math.inf, -val_mse)
                if key > best_key:
                    best_key = key
                    best_params = model.named_arrays()
            if progress is not None:
                progress(record)
    final_params = model.named_arrays()
    if not val_clips:
        best_params = final_params
    return best_key, init_seed, history, best_params, final_params


def train(manifest: DatasetManifest, dim: str, acfg: ArchitectureConfig,
          tcfg: TrainConfig, pipeline: PipelineConfig,
          progress=None) -> ModelCheckpoint:
    """Minibatch MSE descent with periodic validation snapshots.

    When tcfg.restarts > 1 and an attempt's best validation correlation
    stays below tcfg.restart_below_val_r, training retries from the
    next deterministic initialization stream; the attempt with the best
    validation correlation wins. A single-restart config reproduces the
    plain fixed-iteration run.
    """
    if dim not in IM_DIMENSIONS:
        raise ConfigError(f"unknown score dimension {dim!r}")
    tcfg.validate()
    expected_frames = pipeline.raster.frames_total(pipeline.window_s)
    if pipeline.raster.frames_per_block != acfg.input_shape[0]:
        raise ConfigError(f"raster frames_per_block {pipeline.raster.frames_per_block} "
                          f"!= model block length {acfg.input_shape[0]}")

    dim_index = IM_DIMENSIONS.index(dim)
    split = split_participants(manifest, tcfg)
    samples = prepare_clips(manifest, pipeline,
                            participants=split["train"] + split["validation"])
    by_split = {name: [s for s in samples if s.participant_id in set(split[name])]
                for name in ("train", "validation")}
    train_clips = by_split["train"]
    val_clips = by_split["validation"]
    if len(train_clips) < tcfg.batch_size:
        raise InsufficientData(f"{len(train_clips)} training clips < batch size {tcfg.batch_size}")
    for s in samples:
        if s.data.shape[0] != expected_frames:
            raise ConfigError(f"clip for {s.participant_id} has {s.data.shape[0]} frames, "
                              f"expected {expected_frames}")
    labels = {id(s): s.scores.get(dim) for s in samples}

    best = None
    history: list[dict] = []
    for attempt in range(tcfg.restarts):
        # attempt 0 keeps the legacy stream derivation
        seed_key = (tcfg.seed, dim_index) if attempt == 0 else (tcfg.seed, dim_index, attempt)
        result = _train_attempt(train_clips, val_clips, labels, acfg, tcfg,
                                seed_key, attempt, progress)
        history.extend(result[2])
        if best is None or result[0] > best[0]:
            best = result
        if best[0][0] >= tcfg.restart_below_val_r:
            break
    best_key, init_seed, _, best_params, final_params = best
    return ModelCheckpoint(
        version=CHECKPOINT_VERSION,
        architecture=acfg,
        dimension=dim,
        seed=init_seed,
        train_config=tcfg,
        pipeline=pipeline,
        split=split,
        history=history,
        best_params=best_params,
        final_params=final_params,
    )


# -- evaluation -----------------------------------------------------------------


@dataclass
class EvalResult:
    report: MetricReport
    participants: list[str]
    predictions: np.ndarray
    labels: np.ndarray
    clip_predictions: dict[str, list[float]]


def evaluate(checkpoint: ModelCheckpoint, manifest: DatasetManifest,
             split: str = "test", use: str = "best") -> EvalResult:
    """Participant-level metrics: clip scores are averaged per participant."""
    if split == "holdout":
        pids = sorted(e.participant_id for e in manifest.entries if e.split == "holdout")
    elif split in ("train", "validation", "test"):
        pids = checkpoint.split.get(split, [])
    else:
        raise ConfigError(f"unknown split {split!r}")
    if not pids:
        raise EmptySplit(f"split {split!r} has no participants")
    model = checkpoint.build(use=use)
    samples = prepare_clips(manifest, checkpoint.pipeline, participants=pids)
    if not samples:
        raise EmptySplit(f"split {split!r} produced no clips")
    label_map = {e.participant_id: e.scores.get(checkpoint.dimension) for e in manifest.entries}
    clip_predictions: dict[str, list[float]] = {p: [] for p in pids}
    for s in samples:
        clip_predictions[s.participant_id].append(forward(model, s.data))
    predictions = np.array([float(np.mean(clip_predictions[p])) for p in pids])
    labels = np.array([label_map[p] for p in pids])
    report = metric_report(checkpoint.dimension, predictions, labels)
    return EvalResult(report=report, participants=pids, predictions=predictions,
                      labels=labels, clip_predictions=clip_predictions)


# -- checkpoint serialization ------------------------------------------------------


def _write_block(buf: io.BytesIO, data: bytes):
    buf.write(struct.pack("<Q", len(data)))
    buf.write(data)


def _tensor_section(buf: io.BytesIO, arrays: dict[str, np.ndarray]):
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        nb = name.encode("utf-8")
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes())


def save_checkpoint(cp: ModelCheckpoint, path):
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", cp.version))
    header = {
        "architecture": cp.architecture.to_dict(),
        "dimension": cp.dimension,
        "seed": cp.seed,
        "train_config": asdict(cp.train_config),
        "pipeline": asdict(cp.pipeline),
        "split": cp.split,
        "history": cp.history,
    }
    _write_block(buf, json.dumps(header, sort_keys=True).encode("utf-8"))
    _tensor_section(buf, cp.best_params)
    _tensor_section(buf, cp.final_params)
    buf.write(CHECKPOINT_TRAILER)
    try:
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpoint("unexpected end of checkpoint file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_tensor_section(r: _Reader) -> dict[str, np.ndarray]:
    (count,) = r.unpack("<I")
    if count > 10_000:
        raise CorruptCheckpoint(f"implausible tensor count {count}")
    out = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.take(size * 8), dtype="<f8").reshape(shape)
        out[name] = arr.astype(np.float64)
    return out


def load_checkpoint(path) -> ModelCheckpoint:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(data)
    if r.take(4) != CHECKPOINT_MAGIC:
        raise CorruptCheckpoint("bad magic; not a checkpoint file")
    (version,) = r.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    (hlen,) = r.unpack("<Q")
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"unreadable header: {exc}") from exc
    best = _read_tensor_section(r)
    final = _read_tensor_section(r)
    if r.take(4) != CHECKPOINT_TRAILER:
        raise CorruptCheckpoint("missing trailer; file truncated or corrupt")
    try:
        pl = header["pipeline"]
        pipeline = PipelineConfig(window_s=pl["window_s"], stride_s=pl["stride_s"],
                                  raster=RasterConfig(**pl["raster"]),
                                  canonicalize=pl["canonicalize"],
                                  left_eye_index=pl["left_eye_index"],
                                  right_eye_index=pl["right_eye_index"])
        return ModelCheckpoint(
            version=version,
            architecture=ArchitectureConfig.from_dict(header["architecture"]),
            dimension=header["dimension"],
            seed=header["seed"],
            train_config=TrainConfig(**{k: tuple(v) if isinstance(v, list) else v
                                        for k, v in header["train_config"].items()}),
            pipeline=pipeline,
            split={k: list(v) for k, v in header["split"].items()},
            history=header["history"],
            best_params=best,
            final_params=final,
        )
    except (KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"incomplete header: {exc}") from exc
