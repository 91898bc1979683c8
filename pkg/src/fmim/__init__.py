"""Face-motion impression-management toolkit.

Pipeline pieces: landmark file I/O and validation (landmark_io),
eye-axis canonicalization and motion profiling (geometry), overlap
windowing and rasterization (clipper), a small autodiff engine
(engine), the clip-regression model (model), evaluation and
rater-agreement statistics (stats), and a synthetic corpus generator
(synthgen). The ``fmim`` CLI wires them together.
"""

__version__ = "0.1.0"

from .landmark_io import (  # noqa: F401
    IM_DIMENSIONS,
    IMScores,
    Landmark,
    LandmarkFrame,
    LandmarkSequence,
    read_landmark_file,
    write_landmark_file,
)
from .geometry import (  # noqa: F401
    AngleDeltas,
    canonicalize_sequence,
    head_angle_deltas,
    motion_profile,
    projection_scale,
)
from .clipper import ClipWindow, RasterConfig, rasterize_clip, segment_clips  # noqa: F401
from .model import (  # noqa: F401
    ArchitectureConfig,
    ModelCheckpoint,
    PipelineConfig,
    TrainConfig,
    build_model,
    evaluate,
    forward,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .synthgen import BehaviorParams, generate_dataset, generate_participant  # noqa: F401
