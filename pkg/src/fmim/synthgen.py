"""Synthetic interviewee generator with oracle-checkable ground truth.

Each participant is the neutral face template animated by sinusoidal
rigid head rotations plus a non-rigid mouth/brow oscillation plus
i.i.d. observation noise. Ground-truth scores are fixed affine maps of
the generation parameters, clamped to [1, 5]:

  - deceptive dimensions fall as head-motion delta variance rises
    (a perfectly still head scores maximally deceptive), and
  - honest dimensions rise with the expressiveness amplitude.

The motion term is the closed-form variance of the per-transition
angle-delta series: for a sinusoid of amplitude A and frequency f
sampled at fps, consecutive-sample differences have variance
2 A^2 sin^2(pi f / fps). Labels are therefore exact deterministic
functions of the parameters, reproducible by an independent oracle.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import face_template
from .errors import InvalidParams, IoFailure
from .geometry import AngleDeltas, ImageGeometry, lift_frame, rotation_matrices, unlift_frame
from .landmark_io import (
    DatasetManifest,
    IMScores,
    LandmarkFrame,
    LandmarkSequence,
    ManifestEntry,
    validate_sequence,
    write_manifest,
    write_landmark_file,
)

MAX_AMPLITUDE_DEG = 15.0
MAX_EXPRESSIVENESS = 0.08
MAX_NOISE_SIGMA = 0.01
TRAINABLE_MIN_DURATION_S = 300.0

# Ground-truth score maps (affine in motion variance / expressiveness,
# clamped to the scale).
HSP_BASE, HSP_GAIN = 1.0, 50.0
HD_BASE, HD_GAIN = 1.3, 45.0
DIC_DIV = 54.0
DIP_DIV = 80.0


@dataclass(frozen=True)
class BehaviorParams:
    motion_amplitude_deg: tuple[float, float, float]  # about x, y, z
    motion_freq_hz: tuple[float, float, float]
    expressiveness: float
    noise_sigma: float
    duration_s: float
    seed: int
    fps: float = 30.0
    width_px: int = 640
    height_px: int = 480


def validate_params(p: BehaviorParams, trainable: bool = False):
    if p.fps <= 0:
        raise InvalidParams(f"fps must be positive, got {p.fps}")
    if p.width_px <= 0 or p.height_px <= 0:
        raise InvalidParams("frame dimensions must be positive")
    if p.duration_s <= 0:
        raise InvalidParams(f"duration must be positive, got {p.duration_s}")
    if trainable and p.duration_s < TRAINABLE_MIN_DURATION_S:
        raise InvalidParams(
            f"trainable fixtures need duration >= {TRAINABLE_MIN_DURATION_S} s, got {p.duration_s}")
    for a in p.motion_amplitude_deg:
        if not (0.0 <= a <= MAX_AMPLITUDE_DEG):
            raise InvalidParams(f"motion amplitude {a} outside [0, {MAX_AMPLITUDE_DEG}] deg")
    for f in p.motion_freq_hz:
        if not (0.0 < f < p.fps / 2.0):
            raise InvalidParams(f"motion frequency {f} outside (0, fps/2 = {p.fps / 2.0}) Hz")
    if not (0.0 <= p.expressiveness <= MAX_EXPRESSIVENESS):
        raise InvalidParams(f"expressiveness {p.expressiveness} outside [0, {MAX_EXPRESSIVENESS}]")
    if not (0.0 <= p.noise_sigma <= MAX_NOISE_SIGMA):
        raise InvalidParams(f"noise sigma {p.noise_sigma} outside [0, {MAX_NOISE_SIGMA}]")


def motion_delta_variance(p: BehaviorParams) -> float:
    """Closed-form variance (deg^2) of the inter-frame angle deltas."""
    total = 0.0
    for a, f in zip(p.motion_amplitude_deg, p.motion_freq_hz):
        total += 2.0 * a * a * math.sin(math.pi * f / p.fps) ** 2
    return total


def _clamp_scale(v: float) -> float:
    return min(5.0, max(1.0, v))


def ground_truth_scores(p: BehaviorParams) -> IMScores:
    v = motion_delta_variance(p)
    e = p.expressiveness
    return IMScores(
        honest_self_promotion=_clamp_scale(HSP_BASE + HSP_GAIN * e),
        honest_defensiveness=_clamp_scale(HD_BASE + HD_GAIN * e),
        deceptive_image_creation=_clamp_scale(5.0 - v / DIC_DIV),
        deceptive_image_protection=_clamp_scale(5.0 - v / DIP_DIV),
    )


def generate_participant(participant_id: str, p: BehaviorParams) -> tuple[LandmarkSequence, IMScores]:
    """Animate the neutral template into a full landmark sequence."""
    validate_params(p)
    rng = np.random.default_rng(p.seed)
    geo = ImageGeometry(h=p.height_px, w=p.width_px)
    base = lift_frame(face_template.build_neutral_face(), geo)
    centroid = base.mean(axis=0)
    pattern = face_template.expressiveness_pattern()
    pattern_px = pattern * np.array([geo.w, geo.h, geo.f])
    expr_freq = rng.uniform(0.06, min(0.2, 0.49 * p.fps))
    expr_phase = rng.uniform(0.0, 2.0 * math.pi)
    n_frames = max(1, round(p.duration_s * p.fps))
    noise = rng.normal(0.0, p.noise_sigma, size=(n_frames, 468, 3)) if p.noise_sigma > 0 else None

    ax, ay, az = p.motion_amplitude_deg
    fx, fy, fz = p.motion_freq_hz
    frames = []
    for j in range(n_frames):
        t = j / p.fps
        wobble = math.sin(2.0 * math.pi * expr_freq * t + expr_phase)
        deformed = base + pattern_px * (p.expressiveness * wobble)
        angles = AngleDeltas(
            theta_xy=az * math.sin(2.0 * math.pi * fz * t),
            theta_xz=ay * math.sin(2.0 * math.pi * fy * t),
            theta_zy=ax * math.sin(2.0 * math.pi * fx * t),
        )
        r_x, r_y, r_z = rotation_matrices(angles)
        rot = (r_z @ r_y @ r_x)[:3, :3]
        pts = (deformed - centroid) @ rot.T + centroid
        coords = unlift_frame(pts, geo)
        if noise is not None:
            coords = coords + noise[j]
        frames.append(LandmarkFrame(j, round(j * 1000.0 / p.fps), coords))
    seq = LandmarkSequence(participant_id=participant_id, fps=p.fps,
                           width_px=p.width_px, height_px=p.height_px, frames=frames)
    validate_sequence(seq)
    return seq, ground_truth_scores(p)


def default_behavior_sampler(rng: np.random.Generator, seed: int, fps: float,
                             duration_s: float) -> BehaviorParams:
    """Corpus parameter distribution.

    A single motion scale is split across the three axes so total
    motion variance tracks one latent factor; frequencies stay in a
    band where consecutive-frame deltas remain informative at the
    corpus fps.
    """
    scale = rng.uniform(0.5, 14.0)
    weights = rng.uniform(0.4, 1.0, size=3)
    weights /= np.linalg.norm(weights)
    freq_hi = min(0.2, 0.4 * fps)
    freq_lo = freq_hi * 0.4
    return BehaviorParams(
        motion_amplitude_deg=tuple(float(scale * w) for w in weights),
        motion_freq_hz=tuple(float(v) for v in rng.uniform(freq_lo, freq_hi, size=3)),
        expressiveness=float(rng.uniform(0.01, 0.08)),
        noise_sigma=float(rng.uniform(0.0, 0.002)),
        duration_s=duration_s,
        seed=seed,
        fps=fps,
    )


def largest_remainder_split(n: int, ratios=(0.8, 0.1, 0.1)) -> tuple[int, int, int]:
    """Integer seat allocation; ties go to the earlier ratio."""
    quotas = [n * r for r in ratios]
    base = [int(q) for q in quotas]
    remainders = [q - b for q, b in zip(quotas, base)]
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[: n - sum(base)]:
        base[i] += 1
    return tuple(base)


def generate_dataset(n: int, out_dir, seed: int, holdout: int = 0,
                     fps: float = 30.0, duration_s: float = TRAINABLE_MIN_DURATION_S,
                     sampler=default_behavior_sampler,
                     ratios=(0.8, 0.1, 0.1),
                     min_duration_s: float = TRAINABLE_MIN_DURATION_S) -> DatasetManifest:
    """Generate n participants, write files, manifest and sidecars.

    The non-holdout participants get train/validation/test tags by a
    seeded shuffle with largest-remainder counts; when holdout > 0 that
    many randomly chosen participants are tagged holdout instead,
    mirroring a separate concurrent-validity sample. min_duration_s is
    the trainable-fixture floor; callers working with a shorter clip
    window may lower it to match.
    """
    if n < 1:
        raise InvalidParams(f"need at least one participant, got {n}")
    if not (0 <= holdout < n) and not (holdout == 0 and n == 1):
        raise InvalidParams(f"holdout {holdout} must lie in [0, n)")
    if duration_s < min_duration_s:
        raise InvalidParams(
            f"corpus duration {duration_s} s below the trainable floor {min_duration_s} s")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc

    master = np.random.SeedSequence(seed)
    child_seeds = master.spawn(n + 1)
    split_rng = np.random.default_rng(child_seeds[0])
    order = split_rng.permutation(n)
    tags = [""] * n
    holdout_ids = set(order[:holdout])
    remaining = [i for i in order if i not in holdout_ids]
    n_train, n_val, n_test = largest_remainder_split(len(remaining), ratios)
    for pos, i in enumerate(remaining):
        if pos < n_train:
            tags[i] = "train"
        elif pos < n_train + n_val:
            tags[i] = "validation"
        else:
            tags[i] = "test"
    for i in holdout_ids:
        tags[i] = "holdout"

    width = max(3, len(str(n)))
    entries = []
    for i in range(n):
        pid = f"P{i + 1:0{width}d}"
        prng = np.random.default_rng(child_seeds[i + 1])
        params = sampler(prng, seed=int(prng.integers(0, 2**31 - 1)), fps=fps,
                         duration_s=duration_s)
        validate_params(params)
        seq, scores = generate_participant(pid, params)
        fname = f"{pid}.lmk"
        write_landmark_file(seq, os.path.join(out_dir, fname))
        sidecar = {
            "participant_id": pid,
            "motion_amplitude_deg": list(params.motion_amplitude_deg),
            "motion_freq_hz": list(params.motion_freq_hz),
            "expressiveness": params.expressiveness,
            "noise_sigma": params.noise_sigma,
            "duration_s": params.duration_s,
            "fps": params.fps,
            "seed": params.seed,
            "scores": list(scores),
        }
        try:
            with open(os.path.join(out_dir, f"{pid}.params.json"), "w", encoding="utf-8") as fh:
                json.dump(sidecar, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise IoFailure(f"cannot write sidecar for {pid}: {exc}") from exc
        entries.append(ManifestEntry(pid, fname, scores, tags[i]))

    manifest = DatasetManifest(entries=entries, base_dir=str(out_dir))
    write_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest
