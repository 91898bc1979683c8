import numpy as np
import pytest

from fmim.clipper import RasterConfig
from fmim.face_template import build_neutral_face
from fmim.geometry import AngleDeltas, ImageGeometry, lift_frame, rotation_matrices, unlift_frame
from fmim.landmark_io import LandmarkFrame, LandmarkSequence
from fmim.model import ArchitectureConfig, ConvStage, PipelineConfig, PoolStage, TrainConfig


def make_sequence(coords, fps=30.0, width=640, height=480, pid="P001"):
    """LandmarkSequence from an (n, 468, 3) array with uniform timestamps."""
    frames = [LandmarkFrame(j, round(j * 1000.0 / fps), np.asarray(c, dtype=float))
              for j, c in enumerate(coords)]
    return LandmarkSequence(participant_id=pid, fps=fps, width_px=width,
                            height_px=height, frames=frames)


def static_sequence(n_frames=5, fps=30.0, pid="P001"):
    base = build_neutral_face()
    return make_sequence(np.repeat(base[None, :, :], n_frames, axis=0), fps=fps, pid=pid)


def rigid_rotation_sequence(angles_deg, axis="z", fps=30.0, pid="P001",
                            width=640, height=480):
    """Template rotated about its centroid by the given angle per frame."""
    geo = ImageGeometry(h=height, w=width)
    base = lift_frame(build_neutral_face(), geo)
    centroid = base.mean(axis=0)
    out = []
    for theta in angles_deg:
        a = AngleDeltas(theta_xy=theta if axis == "z" else 0.0,
                        theta_xz=theta if axis == "y" else 0.0,
                        theta_zy=theta if axis == "x" else 0.0)
        r_x, r_y, r_z = rotation_matrices(a)
        rot = (r_z @ r_y @ r_x)[:3, :3]
        pts = (base - centroid) @ rot.T + centroid
        out.append(unlift_frame(pts, geo))
    return make_sequence(np.stack(out), fps=fps, pid=pid, width=width, height=height)


def tiny_architecture() -> ArchitectureConfig:
    """Smallest config that exercises every stage kind; for fast tests."""
    return ArchitectureConfig(
        name="tiny",
        input_shape=(4, 16, 16, 1),
        stages=(
            ConvStage("conv3d_1", 4, stride=(1, 2, 2), padding=(1, 1, 1)),
            PoolStage("pool_1", (2, 2, 2)),
        ),
        embedding_channels=8,
        bridge_width=8,
        lstm_hidden=8,
        head_widths=(8, 8, 8, 8),
    )


def tiny_pipeline() -> PipelineConfig:
    return PipelineConfig(
        window_s=8.0,
        stride_s=4.0,
        raster=RasterConfig(height=16, width=16, channels=1,
                            frames_per_block=4, block_s=4.0, splat_radius=1.0),
        canonicalize=False,
    )


def tiny_train_config(**overrides) -> TrainConfig:
    defaults = dict(iterations=12, batch_size=2, learning_rate=0.01,
                    eval_every=4, split=(0.6, 0.2, 0.2), seed=0)
    defaults.update(overrides)
    return TrainConfig(**defaults)


@pytest.fixture
def neutral_face():
    return build_neutral_face()
