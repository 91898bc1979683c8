"""Synthetic neutral 468-point face template.

A symmetric, anatomically plausible landmark layout used by the
synthetic-participant generator and as the rig for the extractor's
fallback detector. The layout is entirely synthetic (no capture data);
only two conventions are load-bearing: the point count (468) and the
outer eye-corner indices (33 left, 263 right), which match the
canonical mesh topology so downstream eye-axis code works unchanged
on real extractor output.

Coordinates are normalized: x, y in [0, 1], z on the x scale with
negative values toward the camera.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

FACE_CENTER = (0.5, 0.48)

# Index ranges partitioning 0..467 by facial region.
BROW_LEFT = range(0, 25)
EYE_LEFT = range(25, 41)       # index 33 is the outer (leftmost) corner
BROW_RIGHT = range(41, 66)
LIPS_OUTER = range(66, 106)
LIPS_INNER = range(106, 146)
FACE_OVAL = range(146, 182)
NOSE = range(182, 222)
CHEEK_LEFT = range(222, 255)
EYE_RIGHT = range(255, 271)    # index 263 is the outer (rightmost) corner
CHEEK_RIGHT = range(271, 304)
FILL = range(304, 468)

MOUTH_GROUP = list(LIPS_OUTER) + list(LIPS_INNER)
BROW_GROUP = list(BROW_LEFT) + list(BROW_RIGHT)
# lower-face points that ride along when the mouth opens (jaw drop)
JAW_FOLLOW_Y = 0.60


def _face_z(x: float, y: float) -> float:
    cx, cy = FACE_CENTER
    bulge = 1.0 - ((x - cx) / 0.26) ** 2 - ((y - cy) / 0.34) ** 2
    return -0.10 * max(0.0, bulge)


def _ellipse_ring(cx, cy, rx, ry, n, phase=0.0, z_offset=0.0):
    pts = []
    for k in range(n):
        a = 2.0 * math.pi * k / n + phase
        x = cx + rx * math.cos(a)
        y = cy + ry * math.sin(a)
        pts.append((x, y, _face_z(x, y) + z_offset))
    return pts


def _arc(x0, y0, x1, y1, n, sag=0.0, z_offset=0.0):
    pts = []
    for k in range(n):
        t = k / (n - 1) if n > 1 else 0.0
        x = x0 + (x1 - x0) * t
        y = y0 + (y1 - y0) * t + sag * math.sin(math.pi * t)
        pts.append((x, y, _face_z(x, y) + z_offset))
    return pts


def build_neutral_face() -> np.ndarray:
    """Deterministically construct the (468, 3) neutral template."""
    pts = np.zeros((468, 3), dtype=float)

    def place(indices, coords):
        idx = list(indices)
        assert len(idx) == len(coords)
        for i, c in zip(idx, coords):
            pts[i] = c

    place(BROW_LEFT, _arc(0.33, 0.37, 0.47, 0.365, 25, sag=-0.012, z_offset=-0.005))
    place(BROW_RIGHT, _arc(0.53, 0.365, 0.67, 0.37, 25, sag=-0.012, z_offset=-0.005))
    # eye rings are phased so the outer corner of each eye lands on the
    # canonical index (33 = 25 + 8 at angle pi; 263 = 255 + 8 at angle 0)
    place(EYE_LEFT, _ellipse_ring(0.40, 0.415, 0.050, 0.020, 16, phase=0.0))
    place(EYE_RIGHT, _ellipse_ring(0.60, 0.415, 0.050, 0.020, 16, phase=math.pi))
    place(LIPS_OUTER, _ellipse_ring(0.5, 0.62, 0.085, 0.035, 40, z_offset=-0.01))
    place(LIPS_INNER, _ellipse_ring(0.5, 0.62, 0.055, 0.018, 40, z_offset=-0.01))
    place(FACE_OVAL, _ellipse_ring(*FACE_CENTER, 0.22, 0.30, 36))
    nose = (_arc(0.5, 0.42, 0.5, 0.56, 10, z_offset=-0.03)
            + _arc(0.46, 0.57, 0.54, 0.57, 10, z_offset=-0.025)
            + _arc(0.455, 0.545, 0.47, 0.575, 10, z_offset=-0.015)
            + _arc(0.53, 0.575, 0.545, 0.545, 10, z_offset=-0.015))
    place(NOSE, nose)
    place(CHEEK_LEFT, _arc(0.31, 0.47, 0.44, 0.55, 11)
          + _arc(0.32, 0.52, 0.44, 0.59, 11)
          + _arc(0.34, 0.57, 0.44, 0.63, 11))
    place(CHEEK_RIGHT, _arc(0.56, 0.55, 0.69, 0.47, 11)
          + _arc(0.56, 0.59, 0.68, 0.52, 11)
          + _arc(0.56, 0.63, 0.66, 0.57, 11))
    # concentric fill rings for forehead, temples and chin
    fill = []
    ring_sizes = (12, 16, 20, 24, 28, 32, 32)
    for j, n in enumerate(ring_sizes):
        frac = 0.18 + 0.77 * j / (len(ring_sizes) - 1)
        fill.extend(_ellipse_ring(*FACE_CENTER, 0.20 * frac, 0.28 * frac, n,
                                  phase=0.5 * j))
    place(FILL, fill[: len(FILL)])
    # rounding kills trig dust so mirrored features are exactly symmetric
    # and the rest-pose eye axis is exactly horizontal
    return np.round(pts, 12)


def template_fixture_path() -> str:
    """Shipped copy of the template in landmark-file format.

    The on-disk fixture is the interchange rig for the extractor side;
    build_neutral_face() is its source of truth at full precision.
    """
    return str(resources.files("fmim") / "data" / "neutral_face_468.lmk")


# Ring/arc connectivity for optional mesh-edge rendering: consecutive
# points within each region, rings closed.
def mesh_edges() -> list[tuple[int, int]]:
    edges = []
    for ring in (EYE_LEFT, EYE_RIGHT, LIPS_OUTER, LIPS_INNER, FACE_OVAL):
        idx = list(ring)
        edges.extend((idx[i], idx[(i + 1) % len(idx)]) for i in range(len(idx)))
    for arc_range in (BROW_LEFT, BROW_RIGHT):
        idx = list(arc_range)
        edges.extend((idx[i], idx[i + 1]) for i in range(len(idx) - 1))
    return edges


def expressive_indices() -> list[int]:
    """All landmark indices moved by the expressiveness pattern."""
    base = build_neutral_face()
    jaw = [i for region in (FACE_OVAL, CHEEK_LEFT, CHEEK_RIGHT, NOSE, FILL)
           for i in region if base[i, 1] > JAW_FOLLOW_Y]
    return sorted(set(MOUTH_GROUP) | set(BROW_GROUP) | set(jaw))


def expressiveness_pattern() -> np.ndarray:
    """Unit displacement field for non-rigid mouth/brow/jaw motion.

    Lower-lip points drop and the lower face follows them (jaw drop,
    ramped by depth below the mouth line), upper-lip points rise
    slightly, lip corners widen outward, brows lift; everything else
    stays put. Scaled by the expressiveness amplitude and a
    per-participant oscillation during generation. The widening and
    jaw components keep the signature visible under head rotation,
    which mostly translates the mouth region.
    """
    base = build_neutral_face()
    pattern = np.zeros_like(base)
    mouth_cy = 0.62
    for i in MOUTH_GROUP:
        below = base[i, 1] >= mouth_cy
        pattern[i, 1] = 1.0 if below else -0.35
        pattern[i, 0] = 0.6 * (base[i, 0] - 0.5) / 0.085
    for i in BROW_GROUP:
        pattern[i, 1] = -0.8
    for region in (FACE_OVAL, CHEEK_LEFT, CHEEK_RIGHT, NOSE, FILL):
        for i in region:
            if base[i, 1] > JAW_FOLLOW_Y:
                ramp = min(1.0, (base[i, 1] - JAW_FOLLOW_Y) / 0.12)
                pattern[i, 1] = 0.9 * ramp
    return pattern
