"""Homogeneous-coordinate geometry for face-landmark sequences.

Implements the projection scale, the 2D->3D lift, eye-axis angle deltas,
and the rotation / scaling / shearing canonicalization that aligns each
frame's eye axis onto its predecessor's, plus head-motion profiling.

Conventions:
  - Angles are degrees at every public boundary, radians internally.
  - Matrices are 4x4 row-major numpy arrays acting on column vectors
    (x, y, z, 1).
  - After lifting, coordinates are pixels with the origin at the image
    center; depth is scaled by the projection diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    CanonicalizationError,
    DegenerateEyeLine,
    DegenerateScale,
    NonPositiveDimension,
    TangentPole,
    TooShort,
)
from .landmark_io import Landmark, LandmarkFrame, LandmarkSequence

# Outer eye-corner indices in the canonical 468-point mesh topology.
LEFT_EYE_OUTER = 33
RIGHT_EYE_OUTER = 263

Mat4 = np.ndarray  # shape (4, 4), float64


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class AngleDeltas(NamedTuple):
    """Per-transition head-angle changes in degrees.

    theta_xy is the twist (about z), theta_xz the nod (about y),
    theta_zy the shake (about x). Each lies in (-180, 180].
    """

    theta_xy: float
    theta_xz: float
    theta_zy: float


@dataclass(frozen=True)
class ImageGeometry:
    h: int
    w: int
    f: float = field(init=False)

    def __post_init__(self):
        if self.h <= 0 or self.w <= 0:
            raise NonPositiveDimension(f"image dimensions must be positive, got h={self.h} w={self.w}")
        object.__setattr__(self, "f", projection_scale(self.h, self.w))


@dataclass(frozen=True)
class EyeAxisPair:
    left: Point3
    right: Point3

    def __post_init__(self):
        if tuple(self.left) == tuple(self.right):
            raise DegenerateEyeLine("eye corners coincide; eye line undefined")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.right, dtype=float) - np.asarray(self.left, dtype=float)


@dataclass(frozen=True)
class MotionProfile:
    """Inter-frame angle-delta series plus summary statistics.

    deltas has shape (n_frames - 1, 3) ordered (theta_xy, theta_xz,
    theta_zy). Variances use the population (n) denominator so a
    single-transition series is still defined.
    """

    deltas: np.ndarray
    mean_abs: tuple[float, float, float]
    variance: tuple[float, float, float]
    rigidity_index: float


def projection_scale(h: float, w: float) -> float:
    """Diagonal projection scale in pixels for an h-by-w frame."""
    if h <= 0 or w <= 0:
        raise NonPositiveDimension(f"projection scale needs positive dimensions, got h={h} w={w}")
    return math.sqrt(h * h + w * w)


def lift_to_3d(lm: Landmark | Sequence[float], geo: ImageGeometry) -> Point3:
    """Map a normalized landmark into centered pixel space.

    x and y are recentred on the image center; depth is scaled by the
    projection diagonal so all three axes share pixel units.
    """
    x_fm, y_fm, z_fm = (lm.x_fm, lm.y_fm, lm.z_fm) if isinstance(lm, Landmark) else lm
    return Point3(x_fm * geo.w - geo.w / 2.0, y_fm * geo.h - geo.h / 2.0, z_fm * geo.f)


def lift_frame(coords: np.ndarray, geo: ImageGeometry) -> np.ndarray:
    """Vectorized lift of an (n, 3) normalized-coordinate array."""
    out = np.empty_like(coords, dtype=float)
    out[:, 0] = coords[:, 0] * geo.w - geo.w / 2.0
    out[:, 1] = coords[:, 1] * geo.h - geo.h / 2.0
    out[:, 2] = coords[:, 2] * geo.f
    return out


def unlift_frame(points: np.ndarray, geo: ImageGeometry) -> np.ndarray:
    out = np.empty_like(points, dtype=float)
    out[:, 0] = (points[:, 0] + geo.w / 2.0) / geo.w
    out[:, 1] = (points[:, 1] + geo.h / 2.0) / geo.h
    out[:, 2] = points[:, 2] / geo.f
    return out


def guarded_atan_deg(num: float, den: float, atol: float = 0.0) -> float:
    """atan(num/den) in degrees with the degenerate-ratio guards.

    Returns 0 when both terms vanish and 90 when only the denominator
    does. atol widens the vanish test so post-alignment floating-point
    dust does not produce arbitrary angles.
    """
    n = abs(num)
    d = abs(den)
    if n <= atol:
        n = 0.0
    if d <= atol:
        d = 0.0
    if d == 0.0:
        return 0.0 if n == 0.0 else 90.0
    return math.degrees(math.atan(n / d))


def _axis_deltas(p_a: Point3, p_b: Point3) -> tuple[float, float, float]:
    return (p_b[0] - p_a[0], p_b[1] - p_a[1], p_b[2] - p_a[2])


def head_angle_deltas(p1, p2, p3, p4, atol: float = 0.0) -> AngleDeltas:
    """Angle change of the eye line between two frames, unsigned-ratio form.

    p1/p2 are the eye corners at frame t, p3/p4 at frame t+1. Each
    component is the frame-t planar angle minus the frame-(t+1) planar
    angle, with both angles folded into [0, 90] by the absolute-value
    ratios; the result is the correction that maps frame t+1 back onto
    frame t when no fold is crossed asymmetrically.
    """
    if tuple(p1) == tuple(p2) or tuple(p3) == tuple(p4):
        raise DegenerateEyeLine("eye corners coincide; angle deltas undefined")
    dx1, dy1, dz1 = _axis_deltas(p1, p2)
    dx2, dy2, dz2 = _axis_deltas(p3, p4)
    theta_xy = guarded_atan_deg(dy1, dx1, atol) - guarded_atan_deg(dy2, dx2, atol)
    theta_xz = guarded_atan_deg(dz1, dx1, atol) - guarded_atan_deg(dz2, dx2, atol)
    theta_zy = guarded_atan_deg(dy1, dz1, atol) - guarded_atan_deg(dy2, dz2, atol)
    return AngleDeltas(theta_xy, theta_xz, theta_zy)


def _planar_angle(num: float, den: float, atol: float) -> float:
    if abs(num) <= atol:
        num = 0.0
    if abs(den) <= atol:
        den = 0.0
    if num == 0.0 and den == 0.0:
        return 0.0
    return math.degrees(math.atan2(num, den))


def _wrap_deg(a: float) -> float:
    a = math.fmod(a, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


def signed_angle_deltas(p1, p2, p3, p4, atol: float = 0.0) -> AngleDeltas:
    """Direction-preserving variant of head_angle_deltas.

    Uses full-plane atan2 angles in each coordinate plane instead of the
    folded ratios, so the sign of each rotation survives and zero
    crossings do not alias. Agrees with head_angle_deltas whenever both
    axes stay inside one quadrant of the plane.
    """
    if tuple(p1) == tuple(p2) or tuple(p3) == tuple(p4):
        raise DegenerateEyeLine("eye corners coincide; angle deltas undefined")
    dx1, dy1, dz1 = _axis_deltas(p1, p2)
    dx2, dy2, dz2 = _axis_deltas(p3, p4)
    theta_xy = _wrap_deg(_planar_angle(dy1, dx1, atol) - _planar_angle(dy2, dx2, atol))
    theta_xz = _wrap_deg(_planar_angle(dz1, dx1, atol) - _planar_angle(dz2, dx2, atol))
    theta_zy = _wrap_deg(_planar_angle(dy1, dz1, atol) - _planar_angle(dy2, dz2, atol))
    return AngleDeltas(theta_xy, theta_xz, theta_zy)


def rotation_matrices(a: AngleDeltas) -> tuple[Mat4, Mat4, Mat4]:
    """Rotation matrices (R_x, R_y, R_z) built from the angle deltas.

    R_x turns about x by theta_zy (shake), R_y about y by theta_xz
    (nod), R_z about z by theta_xy (twist).
    """
    rx = math.radians(a.theta_zy)
    ry = math.radians(a.theta_xz)
    rz = math.radians(a.theta_xy)
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    r_x = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, cx, -sx, 0.0],
        [0.0, sx, cx, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    r_y = np.array([
        [cy, 0.0, -sy, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [sy, 0.0, cy, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    r_z = np.array([
        [cz, -sz, 0.0, 0.0],
        [sz, cz, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return r_x, r_y, r_z


def _scale_ratio(num: float, den: float, tol: float) -> float:
    n = abs(num)
    d = abs(den)
    if n <= tol:
        n = 0.0
    if d <= tol:
        d = 0.0
    if d == 0.0:
        if n == 0.0:
            return 1.0  # degenerate axis carries no scale information
        raise DegenerateScale(f"zero denominator with nonzero numerator {n}")
    return n / d


def scaling_matrix(p1, p2, p3, p4, tol: float = 0.0) -> Mat4:
    """Diagonal per-axis rescale matching the p3->p4 extent to p1->p2."""
    dref = _axis_deltas(p1, p2)
    dcur = _axis_deltas(p3, p4)
    sx = _scale_ratio(dref[0], dcur[0], tol)
    sy = _scale_ratio(dref[1], dcur[1], tol)
    sz = _scale_ratio(dref[2], dcur[2], tol)
    m = np.eye(4)
    m[0, 0] = sx
    m[1, 1] = sy
    m[2, 2] = sz
    return m


def _tan_phi(theta_deg: float) -> float:
    # phi = theta - 360; tan is 360-periodic so the shift is a no-op in
    # value but kept explicit to match the construction.
    phi = theta_deg - 360.0
    if abs(math.remainder(phi - 90.0, 180.0)) < 1e-9:
        raise TangentPole(f"shear angle {theta_deg} deg lies on a tangent pole")
    return math.tan(math.radians(phi))


def shear_matrices(a: AngleDeltas) -> tuple[Mat4, Mat4, Mat4]:
    """Shear matrices (Sh_x, Sh_y, Sh_z) from phi = theta - 360 degrees.

    phi_x comes from theta_zy, phi_y from theta_xz, phi_z from theta_xy,
    mirroring the rotation-axis assignment.
    """
    tx = _tan_phi(a.theta_zy)  # phi_x
    ty = _tan_phi(a.theta_xz)  # phi_y
    tz = _tan_phi(a.theta_xy)  # phi_z
    sh_x = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [ty, 1.0, 0.0, 0.0],
        [tz, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    sh_y = np.array([
        [1.0, tx, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, tz, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    sh_z = np.array([
        [1.0, 0.0, tx, 0.0],
        [0.0, 1.0, ty, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return sh_x, sh_y, sh_z


def apply_mat4(m: Mat4, points: np.ndarray) -> np.ndarray:
    """Apply a homogeneous transform to an (n, 3) point array."""
    pts = np.asarray(points, dtype=float)
    return pts @ m[:3, :3].T + m[:3, 3]


def _rodrigues(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Minimal 3x3 rotation mapping unit vector u onto unit vector w."""
    axis = np.cross(u, w)
    s = float(np.linalg.norm(axis))
    c = float(np.dot(u, w))
    if s < 1e-15:
        if c > 0.0:
            return np.eye(3)
        # antiparallel: rotate pi about any axis perpendicular to u
        helper = np.array([1.0, 0.0, 0.0]) if abs(u[0]) <= abs(u[1]) else np.array([0.0, 1.0, 0.0])
        p = np.cross(u, helper)
        p /= np.linalg.norm(p)
        return 2.0 * np.outer(p, p) - np.eye(3)
    k = axis / s
    kx = np.array([
        [0.0, -k[2], k[1]],
        [k[2], 0.0, -k[0]],
        [-k[1], k[0], 0.0],
    ])
    return np.eye(3) + s * kx + (1.0 - c) * (kx @ kx)


def alignment_angles(v_from: np.ndarray, v_to: np.ndarray) -> AngleDeltas:
    """Angles whose R_z . R_y . R_x composition rotates v_from onto v_to.

    The minimal rotation between the two directions is decomposed into
    the three axis rotations exactly as rotation_matrices builds them,
    so composing the returned deltas reproduces the alignment to
    machine precision.
    """
    u = np.asarray(v_from, dtype=float)
    w = np.asarray(v_to, dtype=float)
    nu = np.linalg.norm(u)
    nw = np.linalg.norm(w)
    if nu == 0.0 or nw == 0.0:
        raise DegenerateEyeLine("cannot align a zero-length eye axis")
    q = _rodrigues(u / nu, w / nw)
    # q = Rz(g) . Ry_std(b) . Rx(a); the y matrix used here is the
    # transpose of the standard form, hence the sign flip on beta.
    sy = -q[2, 0]
    cy = math.hypot(q[2, 1], q[2, 2])
    beta = math.atan2(sy, cy)
    if cy > 1e-12:
        alpha = math.atan2(q[2, 1], q[2, 2])
        gamma = math.atan2(q[1, 0], q[0, 0])
    else:
        gamma = 0.0
        alpha = math.atan2(q[0, 1], q[1, 1]) if sy > 0 else math.atan2(-q[0, 1], q[1, 1])
    return AngleDeltas(math.degrees(gamma), -math.degrees(beta), math.degrees(alpha))


def _sequence_coords(seq: LandmarkSequence) -> np.ndarray:
    return seq.coords()


def _rebuild_sequence(seq: LandmarkSequence, coords: np.ndarray) -> LandmarkSequence:
    frames = [
        LandmarkFrame(fr.frame_index, fr.timestamp_ms, pts)
        for fr, pts in zip(seq.frames, coords)
    ]
    return LandmarkSequence(
        participant_id=seq.participant_id,
        fps=seq.fps,
        width_px=seq.width_px,
        height_px=seq.height_px,
        frames=frames,
    )


# Below this length (pixels) an eye axis is considered degenerate.
_AXIS_EPS = 1e-9


def frame_transform(ref_p1: np.ndarray, ref_p2: np.ndarray,
                    cur_p1: np.ndarray, cur_p2: np.ndarray) -> Mat4:
    """Composite Sh_z.Sh_y.Sh_x.S_c.R_z.R_y.R_x aligning one eye axis to another.

    ref_* are the reference-frame eye corners, cur_* the frame being
    canonicalized. The rotation stage turns the current axis parallel to
    the reference, scaling matches per-component extents on the rotated
    corners, and the shears absorb any residual (zero when the first two
    stages are exact).
    """
    v_ref = ref_p2 - ref_p1
    v_cur = cur_p2 - cur_p1
    if np.linalg.norm(v_cur) < _AXIS_EPS:
        raise DegenerateEyeLine("eye axis has zero length")
    angles = alignment_angles(v_cur, v_ref)
    r_x, r_y, r_z = rotation_matrices(angles)
    rot = r_z @ r_y @ r_x
    p3r = apply_mat4(rot, cur_p1[None, :])[0]
    p4r = apply_mat4(rot, cur_p2[None, :])[0]
    scale_tol = _AXIS_EPS * max(1.0, float(np.linalg.norm(v_ref)), float(np.linalg.norm(v_cur)))
    s_c = scaling_matrix(Point3(*ref_p1), Point3(*ref_p2), Point3(*p3r), Point3(*p4r), tol=scale_tol)
    p3s = apply_mat4(s_c, p3r[None, :])[0]
    p4s = apply_mat4(s_c, p4r[None, :])[0]
    residual = signed_angle_deltas(Point3(*ref_p1), Point3(*ref_p2),
                                   Point3(*p3s), Point3(*p4s), atol=scale_tol)
    sh_x, sh_y, sh_z = shear_matrices(residual)
    return sh_z @ sh_y @ sh_x @ s_c @ rot


def canonicalize_sequence(seq: LandmarkSequence,
                          left_idx: int = LEFT_EYE_OUTER,
                          right_idx: int = RIGHT_EYE_OUTER) -> LandmarkSequence:
    """Align every frame's eye axis onto its canonicalized predecessor's.

    Frame 0 passes through untouched; each later frame is lifted to
    pixel space, transformed by the rotate/scale/shear chain computed
    from its eye axis and the previous canonicalized axis, and
    renormalized. Output coordinates may leave [0, 1] for extreme
    motion; serialization enforces the file-format range.
    """
    geo = ImageGeometry(h=seq.height_px, w=seq.width_px)
    coords = _sequence_coords(seq)
    out = np.empty_like(coords)
    out[0] = coords[0]
    ref = lift_frame(coords[0], geo)
    ref_p1, ref_p2 = ref[left_idx], ref[right_idx]
    if np.linalg.norm(ref_p2 - ref_p1) < _AXIS_EPS:
        raise CanonicalizationError(seq.frames[0].frame_index,
                                    DegenerateEyeLine("eye axis has zero length"))
    for t in range(1, len(coords)):
        cur = lift_frame(coords[t], geo)
        try:
            m = frame_transform(ref_p1, ref_p2, cur[left_idx], cur[right_idx])
        except (DegenerateEyeLine, DegenerateScale, TangentPole) as exc:
            raise CanonicalizationError(seq.frames[t].frame_index, exc) from exc
        moved = apply_mat4(m, cur)
        out[t] = unlift_frame(moved, geo)
        ref_p1, ref_p2 = moved[left_idx], moved[right_idx]
    return _rebuild_sequence(seq, out)


def eye_axes(seq: LandmarkSequence,
             left_idx: int = LEFT_EYE_OUTER,
             right_idx: int = RIGHT_EYE_OUTER) -> np.ndarray:
    """Lifted eye-corner pairs per frame, shape (n_frames, 2, 3)."""
    geo = ImageGeometry(h=seq.height_px, w=seq.width_px)
    coords = _sequence_coords(seq)
    lifted = np.stack([lift_frame(fr, geo) for fr in coords])
    return lifted[:, (left_idx, right_idx), :]


def motion_profile(seq: LandmarkSequence,
                   left_idx: int = LEFT_EYE_OUTER,
                   right_idx: int = RIGHT_EYE_OUTER,
                   atol: float = _AXIS_EPS) -> MotionProfile:
    """Per-transition eye-axis angle deltas with summary statistics."""
    if len(seq.frames) < 2:
        raise TooShort("motion profile needs at least 2 frames")
    axes = eye_axes(seq, left_idx, right_idx)
    deltas = np.empty((len(axes) - 1, 3), dtype=float)
    for t in range(len(axes) - 1):
        p1, p2 = axes[t]
        p3, p4 = axes[t + 1]
        d = head_angle_deltas(Point3(*p1), Point3(*p2), Point3(*p3), Point3(*p4), atol=atol)
        deltas[t] = d
    mean_abs = tuple(float(v) for v in np.mean(np.abs(deltas), axis=0))
    variance = tuple(float(v) for v in np.var(deltas, axis=0))
    rigidity = 1.0 / (1.0 + float(np.sum(np.var(deltas, axis=0))))
    return MotionProfile(deltas=deltas, mean_abs=mean_abs, variance=variance,
                         rigidity_index=rigidity)


def canonicalization_residual(seq: LandmarkSequence,
                              left_idx: int = LEFT_EYE_OUTER,
                              right_idx: int = RIGHT_EYE_OUTER) -> float:
    """Mean RMS pixel distance of canonicalized frames from frame 0.

    Zero only for a perfectly static sequence; grows with non-rigid
    motion and observation noise, so it serves as an expressiveness
    proxy after rigid alignment.
    """
    canon = canonicalize_sequence(seq, left_idx, right_idx)
    geo = ImageGeometry(h=seq.height_px, w=seq.width_px)
    coords = _sequence_coords(canon)
    lifted = np.stack([lift_frame(fr, geo) for fr in coords])
    base = lifted[0]
    if len(lifted) == 1:
        return 0.0
    diffs = lifted[1:] - base[None, :, :]
    rms = np.sqrt(np.mean(np.sum(diffs * diffs, axis=2), axis=1))
    return float(np.mean(rms))
