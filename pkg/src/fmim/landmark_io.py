"""Landmark-sequence file format, dataset manifests, and rater tables.

This is the boundary contract between the video-side extractor and the
modeling pipeline. Everything here is byte-specified:

  - Landmark files ("fmim-lmk/1"): one header line
    ``fmim-lmk/1 participant=<id> fps=<fps> width=<px> height=<px>``
    followed by one line per frame:
    ``<frame_index> <timestamp_ms> <x y z> * 468`` with coordinates
    printed at a fixed 6 decimal places.
  - Manifests and score/rater tables: comma-separated with a fixed
    header row.

Coordinates are stored normalized: x and y as fractions of frame width
and height in [0, 1], z dimensionless on the same scale as x (the usual
face-mesh estimator convention; the estimator's depth unit is not
standardized, so this convention is part of the format).
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    DataError,
    IoFailure,
    LandmarkCountMismatch,
    MalformedRecord,
    NonMonotoneFrameIndex,
    RaterTableError,
    SequenceInvariantError,
)

FORMAT_VERSION = "fmim-lmk/1"
LANDMARK_COUNT = 468
COORD_DECIMALS = 6

# Relative tolerance on inter-frame spacing vs the nominal 1/fps period.
TIMESTAMP_JITTER = 0.20

IM_DIMENSIONS = (
    "honest_self_promotion",
    "honest_defensiveness",
    "deceptive_image_creation",
    "deceptive_image_protection",
)

SPLIT_TAGS = ("train", "validation", "test", "holdout")


class Landmark(NamedTuple):
    x_fm: float
    y_fm: float
    z_fm: float


class IMScores(NamedTuple):
    """The four impression-management scores, each on the [1, 5] scale."""

    honest_self_promotion: float
    honest_defensiveness: float
    deceptive_image_creation: float
    deceptive_image_protection: float

    def validate(self):
        for name, value in zip(IM_DIMENSIONS, self):
            if not (1.0 <= value <= 5.0) or not math.isfinite(value):
                raise DataError(f"score {name}={value} outside [1, 5]")

    def get(self, dim: str) -> float:
        return getattr(self, dim)


@dataclass
class LandmarkFrame:
    """One timestamped frame of 468 normalized landmarks.

    Coordinates live in a (468, 3) float array; the ``landmarks`` view
    materializes Landmark tuples on demand.
    """

    frame_index: int
    timestamp_ms: int
    coords: np.ndarray

    @classmethod
    def from_landmarks(cls, frame_index: int, timestamp_ms: int,
                       landmarks: Iterable[Landmark]) -> "LandmarkFrame":
        return cls(frame_index, timestamp_ms, np.array(list(landmarks), dtype=float))

    @property
    def landmarks(self) -> list[Landmark]:
        return [Landmark(*row) for row in self.coords]


@dataclass
class LandmarkSequence:
    participant_id: str
    fps: float
    width_px: int
    height_px: int
    frames: list[LandmarkFrame]

    @property
    def duration_s(self) -> float:
        return len(self.frames) / self.fps

    def coords(self) -> np.ndarray:
        """All frames stacked as (n_frames, 468, 3)."""
        return np.stack([fr.coords for fr in self.frames])


def _check_participant_id(pid: str):
    if not pid:
        raise SequenceInvariantError("participant_id must be nonempty")
    if any(c.isspace() or not c.isprintable() for c in pid):
        raise SequenceInvariantError(f"participant_id {pid!r} contains whitespace or unprintable characters")


def validate_sequence(seq: LandmarkSequence):
    """Raise if any landmark-frame or sequence invariant is violated."""
    _check_participant_id(seq.participant_id)
    if not (seq.fps > 0):
        raise SequenceInvariantError(f"fps must be positive, got {seq.fps}")
    if seq.width_px <= 0 or seq.height_px <= 0:
        raise SequenceInvariantError(f"frame dimensions must be positive, got {seq.width_px}x{seq.height_px}")
    if not seq.frames:
        raise SequenceInvariantError("sequence has no frames")
    nominal_dt = 1000.0 / seq.fps
    prev_index = None
    prev_ts = None
    for fr in seq.frames:
        if fr.frame_index < 0:
            raise SequenceInvariantError(f"negative frame_index {fr.frame_index}")
        if fr.timestamp_ms < 0:
            raise SequenceInvariantError(f"negative timestamp {fr.timestamp_ms}")
        if fr.coords.shape != (LANDMARK_COUNT, 3):
            raise LandmarkCountMismatch(
                f"frame {fr.frame_index} has {fr.coords.shape[0]} landmarks, expected {LANDMARK_COUNT}")
        if not np.all(np.isfinite(fr.coords)):
            raise SequenceInvariantError(f"frame {fr.frame_index} contains non-finite coordinates")
        xy = fr.coords[:, :2]
        if xy.min() < 0.0 or xy.max() > 1.0:
            raise SequenceInvariantError(
                f"frame {fr.frame_index} has x/y coordinates outside [0, 1]")
        if prev_index is not None:
            if fr.frame_index <= prev_index:
                raise NonMonotoneFrameIndex(
                    f"frame_index {fr.frame_index} after {prev_index} is not strictly increasing")
            if fr.timestamp_ms < prev_ts:
                raise SequenceInvariantError(
                    f"timestamp {fr.timestamp_ms} decreases after {prev_ts}")
            dt = fr.timestamp_ms - prev_ts
            # integer-millisecond rounding of the nominal period gets a
            # half-count allowance on top of the jitter band
            if abs(dt - nominal_dt) > TIMESTAMP_JITTER * nominal_dt + 0.5 + 1e-9:
                raise SequenceInvariantError(
                    f"frame spacing {dt} ms deviates more than {TIMESTAMP_JITTER:.0%} "
                    f"from nominal {nominal_dt:.3f} ms (frame {fr.frame_index})")
        prev_index = fr.frame_index
        prev_ts = fr.timestamp_ms


_COORD_FMT = " ".join(["%.6f"] * (LANDMARK_COUNT * 3))


def write_landmark_file(seq: LandmarkSequence, path):
    """Serialize a sequence; byte-deterministic for identical input."""
    validate_sequence(seq)
    buf = io.StringIO()
    buf.write(f"{FORMAT_VERSION} participant={seq.participant_id} "
              f"fps={seq.fps:.6f} width={seq.width_px} height={seq.height_px}\n")
    for fr in seq.frames:
        buf.write(f"{fr.frame_index} {fr.timestamp_ms} ")
        buf.write(_COORD_FMT % tuple(fr.coords.reshape(-1)))
        buf.write("\n")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _parse_header(line: str, offset: int) -> tuple[str, float, int, int]:
    parts = line.split()
    if not parts or parts[0] != FORMAT_VERSION:
        raise MalformedRecord(f"missing or unknown format tag (expected {FORMAT_VERSION})",
                              line=1, offset=offset)
    fields = {}
    for token in parts[1:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise MalformedRecord(f"malformed header token {token!r}", line=1, offset=offset)
        fields[key] = value
    try:
        return (fields["participant"], float(fields["fps"]),
                int(fields["width"]), int(fields["height"]))
    except (KeyError, ValueError) as exc:
        raise MalformedRecord(f"incomplete or invalid header: {exc}", line=1, offset=offset) from exc


def read_landmark_file(path) -> LandmarkSequence:
    """Parse and fully validate a landmark file."""
    try:
        with open(path, "r", encoding="utf-8", newline="\n") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRecord("empty file", line=1, offset=0)
    pid, fps, width, height = _parse_header(lines[0], 0)
    frames = []
    offset = len(lines[0]) + 1
    prev_index = None
    for lineno, line in enumerate(lines[1:], start=2):
        head = line.split(" ", 2)
        if len(head) != 3:
            raise MalformedRecord("frame record needs index, timestamp and coordinates",
                                  line=lineno, offset=offset)
        try:
            frame_index = int(head[0])
            timestamp_ms = int(head[1])
        except ValueError as exc:
            raise MalformedRecord(f"non-integer frame header: {exc}", line=lineno, offset=offset) from exc
        try:
            with warnings.catch_warnings():
                # unparseable tails currently warn; treat them as errors
                warnings.simplefilter("error")
                coords = np.fromstring(head[2], dtype=float, sep=" ")
        except (Warning, ValueError) as exc:
            raise MalformedRecord(f"unparseable coordinates: {exc}",
                                  line=lineno, offset=offset) from exc
        if coords.size != LANDMARK_COUNT * 3:
            if coords.size % 3 == 0:
                raise LandmarkCountMismatch(
                    f"frame {frame_index} has {coords.size // 3} landmarks, expected {LANDMARK_COUNT}",
                    line=lineno, offset=offset)
            raise MalformedRecord(f"frame {frame_index} has {coords.size} coordinate values, "
                                  f"expected {LANDMARK_COUNT * 3}", line=lineno, offset=offset)
        if prev_index is not None and frame_index <= prev_index:
            raise NonMonotoneFrameIndex(
                f"frame_index {frame_index} after {prev_index} is not strictly increasing",
                line=lineno, offset=offset)
        prev_index = frame_index
        frames.append(LandmarkFrame(frame_index, timestamp_ms, coords.reshape(LANDMARK_COUNT, 3)))
        offset += len(line) + 1
    seq = LandmarkSequence(participant_id=pid, fps=fps, width_px=width,
                           height_px=height, frames=frames)
    validate_sequence(seq)
    return seq


@dataclass
class ManifestEntry:
    participant_id: str
    landmark_path: str
    scores: IMScores
    split: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    base_dir: str = "."

    def resolve(self, entry: ManifestEntry) -> str:
        if os.path.isabs(entry.landmark_path):
            return entry.landmark_path
        return os.path.join(self.base_dir, entry.landmark_path)

    def by_split(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


_MANIFEST_HEADER = ["participant_id", "landmark_file", *IM_DIMENSIONS, "split"]


def write_manifest(manifest: DatasetManifest, path):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_MANIFEST_HEADER)
            for e in manifest.entries:
                writer.writerow([e.participant_id, e.landmark_path,
                                 *(f"{v:.6f}" for v in e.scores), e.split])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_manifest(path) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != _MANIFEST_HEADER:
        raise MalformedRecord(f"manifest header must be {','.join(_MANIFEST_HEADER)}", line=1)
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(_MANIFEST_HEADER):
            raise MalformedRecord(f"manifest row has {len(row)} fields, expected {len(_MANIFEST_HEADER)}",
                                  line=lineno)
        try:
            scores = IMScores(*(float(v) for v in row[2:6]))
        except ValueError as exc:
            raise MalformedRecord(f"invalid score: {exc}", line=lineno) from exc
        entries.append(ManifestEntry(row[0], row[1], scores, row[6]))
    return DatasetManifest(entries=entries, base_dir=os.path.dirname(os.path.abspath(path)))


def validate_manifest(manifest: DatasetManifest, check_files: bool = True) -> list[str]:
    """Return a report of invariant violations; empty means valid."""
    report = []
    if not manifest.entries:
        report.append("no entries")
        return report
    seen: dict[str, int] = {}
    for i, e in enumerate(manifest.entries):
        if e.participant_id in seen:
            report.append(f"entry {i}: duplicate participant_id {e.participant_id!r} "
                          f"(first at entry {seen[e.participant_id]})")
        else:
            seen[e.participant_id] = i
        if e.split not in SPLIT_TAGS:
            report.append(f"entry {i}: unknown split tag {e.split!r}")
        try:
            e.scores.validate()
        except DataError as exc:
            report.append(f"entry {i}: {exc}")
        if check_files:
            full = manifest.resolve(e)
            if not os.path.exists(full):
                report.append(f"entry {i}: landmark file {e.landmark_path} does not exist")
            else:
                try:
                    seq = read_landmark_file(full)
                    if seq.participant_id != e.participant_id:
                        report.append(f"entry {i}: file participant {seq.participant_id!r} "
                                      f"does not match manifest {e.participant_id!r}")
                except DataError as exc:
                    report.append(f"entry {i}: landmark file invalid: {exc}")
    return report


class RaterRow(NamedTuple):
    rater_id: str
    participant_id: str
    scores: IMScores


@dataclass
class RaterTable:
    rows: list[RaterRow]

    def validate(self):
        """Exactly 3 distinct raters per rated participant, scores in range."""
        by_participant: dict[str, list[str]] = {}
        for row in self.rows:
            row.scores.validate()
            by_participant.setdefault(row.participant_id, []).append(row.rater_id)
        for pid, raters in by_participant.items():
            if len(raters) != 3 or len(set(raters)) != 3:
                raise RaterTableError(
                    f"participant {pid} has raters {sorted(raters)}; expected exactly 3 distinct")

    def participants(self) -> list[str]:
        return sorted({r.participant_id for r in self.rows})

    def matrix(self, dim: str, participants: list[str] | None = None) -> np.ndarray:
        """(targets, 3) rating matrix; rater columns ordered by rater_id."""
        if participants is None:
            participants = self.participants()
        grouped: dict[str, list[RaterRow]] = {}
        for row in self.rows:
            grouped.setdefault(row.participant_id, []).append(row)
        out = np.empty((len(participants), 3), dtype=float)
        for i, pid in enumerate(participants):
            rows = sorted(grouped.get(pid, []), key=lambda r: r.rater_id)
            if len(rows) != 3:
                raise RaterTableError(f"participant {pid} has {len(rows)} ratings; expected 3")
            out[i] = [r.scores.get(dim) for r in rows]
        return out


_RATER_HEADER = ["rater_id", "participant_id", *IM_DIMENSIONS]


def write_rater_csv(table: RaterTable, path):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_RATER_HEADER)
            for row in table.rows:
                writer.writerow([row.rater_id, row.participant_id,
                                 *(f"{v:.6f}" for v in row.scores)])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_rater_csv(path) -> RaterTable:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != _RATER_HEADER:
        raise MalformedRecord(f"rater table header must be {','.join(_RATER_HEADER)}", line=1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(_RATER_HEADER):
            raise MalformedRecord(f"rater row has {len(row)} fields, expected {len(_RATER_HEADER)}",
                                  line=lineno)
        try:
            scores = IMScores(*(float(v) for v in row[2:6]))
        except ValueError as exc:
            raise MalformedRecord(f"invalid score: {exc}", line=lineno) from exc
        out.append(RaterRow(row[0], row[1], scores))
    return RaterTable(rows=out)


_SCORES_HEADER = ["participant_id", *IM_DIMENSIONS]


def write_scores_csv(scores: dict[str, IMScores], path):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_SCORES_HEADER)
            for pid in sorted(scores):
                writer.writerow([pid, *(f"{v:.6f}" for v in scores[pid])])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_scores_csv(path) -> dict[str, IMScores]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != _SCORES_HEADER:
        raise MalformedRecord(f"scores header must be {','.join(_SCORES_HEADER)}", line=1)
    out: dict[str, IMScores] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(_SCORES_HEADER):
            raise MalformedRecord(f"scores row has {len(row)} fields, expected {len(_SCORES_HEADER)}",
                                  line=lineno)
        if row[0] in out:
            raise MalformedRecord(f"duplicate participant {row[0]!r}", line=lineno)
        try:
            out[row[0]] = IMScores(*(float(v) for v in row[1:5]))
        except ValueError as exc:
            raise MalformedRecord(f"invalid score: {exc}", line=lineno) from exc
    return out
