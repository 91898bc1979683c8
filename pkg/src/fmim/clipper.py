"""Overlap-window clip segmentation and landmark rasterization.

Sequences are cut into fixed-length windows sliding by a stride (the
reference setting: 5-minute windows every minute, so consecutive clips
overlap by 4 minutes). Within a window, frames are kept blockwise: the
first ``frames_per_block`` frames of each consecutive non-overlapping
``block_s``-second block, giving the temporal steps the downstream
recurrent model consumes.

Rendering is deterministic: each landmark splats a unit-intensity disc
onto a zero canvas; mesh edges can optionally be drawn at half
intensity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import face_template
from .errors import ConfigError, ResolutionTooSmall, TooShort, WindowOutOfRange
from .landmark_io import LandmarkSequence

REFERENCE_WINDOW_S = 300.0
REFERENCE_STRIDE_S = 60.0


@dataclass(frozen=True)
class FrameNormalizationSpec:
    """Reference frame-preprocessing constants recorded into file headers."""

    width_px: int = 640
    fps: float = 30.0
    grayscale: bool = True

    @property
    def channels(self) -> int:
        return 1 if self.grayscale else 3


def frame_normalization_spec(grayscale: bool = True) -> FrameNormalizationSpec:
    return FrameNormalizationSpec(grayscale=grayscale)


@dataclass(frozen=True)
class ClipWindow:
    participant_id: str
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def segment_clips(duration_s: float, window_s: float = REFERENCE_WINDOW_S,
                  stride_s: float = REFERENCE_STRIDE_S,
                  participant_id: str = "") -> list[ClipWindow]:
    """Windows starting at 0, stride, 2*stride, ... fitting inside duration."""
    if window_s <= 0 or stride_s <= 0 or window_s <= stride_s:
        raise ConfigError(f"need window > stride > 0, got window={window_s} stride={stride_s}")
    if duration_s < window_s:
        raise TooShort(f"duration {duration_s} s is shorter than one {window_s} s window")
    count = int(math.floor((duration_s - window_s) / stride_s + 1e-9)) + 1
    return [ClipWindow(participant_id, k * stride_s, k * stride_s + window_s)
            for k in range(count)]


@dataclass(frozen=True)
class RasterConfig:
    height: int = 64
    width: int = 64
    channels: int = 1
    frames_per_block: int = 8
    block_s: float = 60.0
    splat_radius: float = 1.0
    draw_edges: bool = False

    def blocks_per_window(self, window_s: float) -> int:
        n = window_s / self.block_s
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ConfigError(f"window {window_s} s is not a whole number of {self.block_s} s blocks")
        return int(round(n))

    def frames_total(self, window_s: float) -> int:
        return self.blocks_per_window(window_s) * self.frames_per_block


@dataclass(frozen=True)
class ClipTensor:
    data: np.ndarray  # (T, H, W, C) in [0, 1]
    window: ClipWindow
    config: RasterConfig = field(repr=False, default=None)

    @property
    def shape(self):
        return self.data.shape


_DISC_CACHE: dict[float, np.ndarray] = {}


def _disc_offsets(radius: float) -> np.ndarray:
    if radius not in _DISC_CACHE:
        r = int(math.ceil(radius))
        span = np.arange(-r, r + 1)
        _DISC_CACHE[radius] = np.stack(np.meshgrid(span, span, indexing="ij"),
                                       axis=-1).reshape(-1, 2)
    return _DISC_CACHE[radius]


def _splat_frame(canvas: np.ndarray, coords: np.ndarray, cfg: RasterConfig):
    """Stamp unit discs for one frame's landmarks onto (H, W) canvas."""
    h, w = canvas.shape
    centers = np.empty((coords.shape[0], 2))
    centers[:, 0] = coords[:, 1] * h - 0.5  # row
    centers[:, 1] = coords[:, 0] * w - 0.5  # col
    offsets = _disc_offsets(cfg.splat_radius)
    anchor = np.round(centers).astype(int)
    cand = anchor[:, None, :] + offsets[None, :, :]          # (n, k, 2)
    d2 = np.sum((cand - centers[:, None, :]) ** 2, axis=-1)
    ok = (d2 <= cfg.splat_radius ** 2 + 1e-12)
    ok &= (cand[..., 0] >= 0) & (cand[..., 0] < h) & (cand[..., 1] >= 0) & (cand[..., 1] < w)
    rows = cand[..., 0][ok]
    cols = cand[..., 1][ok]
    canvas[rows, cols] = 1.0


def _draw_edges(canvas: np.ndarray, coords: np.ndarray, edges):
    h, w = canvas.shape
    for a, b in edges:
        pa = np.array([coords[a, 1] * h - 0.5, coords[a, 0] * w - 0.5])
        pb = np.array([coords[b, 1] * h - 0.5, coords[b, 0] * w - 0.5])
        steps = max(2, int(np.ceil(np.abs(pb - pa).max() * 2)) + 1)
        line = np.round(np.linspace(pa, pb, steps)).astype(int)
        keep = (line[:, 0] >= 0) & (line[:, 0] < h) & (line[:, 1] >= 0) & (line[:, 1] < w)
        line = line[keep]
        np.maximum.at(canvas, (line[:, 0], line[:, 1]), 0.5)


def block_frame_indices(seq_fps: float, win: ClipWindow, cfg: RasterConfig) -> list[int]:
    """Frame indices selected by the blockwise temporal policy."""
    frames_per_block_avail = int(math.floor(cfg.block_s * seq_fps + 1e-9))
    if cfg.frames_per_block > frames_per_block_avail:
        raise ConfigError(
            f"frames_per_block={cfg.frames_per_block} exceeds the {frames_per_block_avail} "
            f"frames available in a {cfg.block_s} s block at {seq_fps} fps")
    indices = []
    for b in range(cfg.blocks_per_window(win.duration_s)):
        t0 = win.start_s + b * cfg.block_s
        j0 = int(math.ceil(t0 * seq_fps - 1e-9))
        indices.extend(range(j0, j0 + cfg.frames_per_block))
    return indices


def rasterize_clip(seq: LandmarkSequence, win: ClipWindow, cfg: RasterConfig) -> ClipTensor:
    """Render a window of a sequence into a (T, H, W, C) tensor."""
    if cfg.height < 16 or cfg.width < 16:
        raise ResolutionTooSmall(f"raster resolution {cfg.height}x{cfg.width} below 16x16")
    if cfg.channels not in (1, 3):
        raise ConfigError(f"channels must be 1 or 3, got {cfg.channels}")
    duration = seq.duration_s
    if win.start_s < 0 or win.end_s > duration + 1e-9:
        raise WindowOutOfRange(
            f"window [{win.start_s}, {win.end_s}) s outside sequence of {duration} s")
    indices = block_frame_indices(seq.fps, win, cfg)
    if indices[-1] >= len(seq.frames):
        raise WindowOutOfRange(
            f"window needs frame {indices[-1]} but sequence has {len(seq.frames)}")
    edges = face_template.mesh_edges() if cfg.draw_edges else None
    out = np.zeros((len(indices), cfg.height, cfg.width, cfg.channels))
    for row, j in enumerate(indices):
        canvas = np.zeros((cfg.height, cfg.width))
        coords = seq.frames[j].coords
        if edges is not None:
            _draw_edges(canvas, coords, edges)
        _splat_frame(canvas, coords, cfg)
        out[row] = canvas[..., None]
    return ClipTensor(data=out, window=win, config=cfg)
