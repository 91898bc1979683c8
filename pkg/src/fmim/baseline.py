"""Linear reference predictor on head-motion profile features.

Scores each participant from the raw (uncanonicalized) motion profile:
per-axis delta variance and mean absolute angle plus the rigidity
index, fitted by ordinary least squares with an intercept. The neural
model is expected to at least approach this baseline on synthetic
corpora whose labels are driven by motion statistics.
"""

from __future__ import annotations

import numpy as np

from .errors import LengthMismatch
from .geometry import motion_profile
from .landmark_io import LandmarkSequence

FEATURE_NAMES = (
    "var_twist", "var_nod", "var_shake",
    "mean_abs_twist", "mean_abs_nod", "mean_abs_shake",
    "rigidity_index",
)


def motion_features(seq: LandmarkSequence) -> np.ndarray:
    """Feature vector (len 7) from the sequence's motion profile."""
    prof = motion_profile(seq)
    return np.array([*prof.variance, *prof.mean_abs, prof.rigidity_index])


def fit_linear(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Least-squares weights (intercept last) for labels ~ features."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"features {x.shape} vs labels {y.shape}")
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    weights, *_ = np.linalg.lstsq(design, y, rcond=None)
    return weights


def predict_linear(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.shape[1] + 1 != weights.shape[0]:
        raise LengthMismatch(f"features {x.shape} vs weights {weights.shape}")
    return x @ weights[:-1] + weights[-1]
