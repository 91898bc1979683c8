import numpy as np
import pytest

from conftest import make_sequence
from fmim.errors import (
    IoFailure,
    LandmarkCountMismatch,
    MalformedRecord,
    NonMonotoneFrameIndex,
    RaterTableError,
    SequenceInvariantError,
)
from fmim.landmark_io import (
    FORMAT_VERSION,
    IM_DIMENSIONS,
    DatasetManifest,
    IMScores,
    ManifestEntry,
    RaterRow,
    RaterTable,
    read_landmark_file,
    read_manifest,
    read_rater_csv,
    read_scores_csv,
    validate_manifest,
    validate_sequence,
    write_landmark_file,
    write_manifest,
    write_rater_csv,
    write_scores_csv,
)


def random_sequence(n_frames=3, seed=0, fps=30.0):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.05, 0.95, size=(n_frames, 468, 3))
    coords[:, :, 2] = rng.uniform(-0.4, 0.4, size=(n_frames, 468))
    return make_sequence(coords, fps=fps)


def scores(v=3.0):
    return IMScores(v, v, v, v)


class TestRoundTrip:
    def test_two_frames(self, tmp_path):
        path = tmp_path / "a.lmk"
        write_landmark_file(random_sequence(2), path)
        seq = read_landmark_file(path)
        assert len(seq.frames) == 2

    def test_read_matches_quantized_write(self, tmp_path):
        src = random_sequence(3, seed=1)
        path = tmp_path / "a.lmk"
        write_landmark_file(src, path)
        back = read_landmark_file(path)
        assert back.participant_id == src.participant_id
        assert back.fps == src.fps
        assert (back.width_px, back.height_px) == (src.width_px, src.height_px)
        for a, b in zip(src.frames, back.frames):
            assert (b.frame_index, b.timestamp_ms) == (a.frame_index, a.timestamp_ms)
            quantized = np.asarray([[float(f"{v:.6f}") for v in row] for row in a.coords])
            assert np.array_equal(b.coords, quantized)

    def test_write_is_deterministic(self, tmp_path):
        seq = random_sequence(3, seed=2)
        p1, p2 = tmp_path / "a.lmk", tmp_path / "b.lmk"
        write_landmark_file(seq, p1)
        write_landmark_file(seq, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_write_read_write_fixed_point(self, tmp_path):
        seq = random_sequence(4, seed=3)
        p1, p2 = tmp_path / "a.lmk", tmp_path / "b.lmk"
        write_landmark_file(seq, p1)
        write_landmark_file(read_landmark_file(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_carries_format_version(self, tmp_path):
        path = tmp_path / "a.lmk"
        write_landmark_file(random_sequence(1), path)
        assert path.read_text().startswith(FORMAT_VERSION + " ")


class TestRejection:
    def test_landmark_count_mismatch(self, tmp_path):
        path = tmp_path / "a.lmk"
        write_landmark_file(random_sequence(2), path)
        lines = path.read_text().splitlines()
        fields = lines[1].split(" ")
        lines[1] = " ".join(fields[:-3])  # drop one x y z triplet
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(LandmarkCountMismatch) as err:
            read_landmark_file(path)
        assert "467" in str(err.value)
        assert "line 2" in str(err.value)

    def test_nonmonotone_frame_index(self, tmp_path):
        path = tmp_path / "a.lmk"
        write_landmark_file(random_sequence(3), path)
        lines = path.read_text().splitlines()
        lines[3] = "0 " + lines[3].split(" ", 1)[1]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(NonMonotoneFrameIndex):
            read_landmark_file(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "a.lmk"
        path.write_text("not-a-landmark-file\n")
        with pytest.raises(MalformedRecord):
            read_landmark_file(path)

    def test_non_numeric_coordinate(self, tmp_path):
        path = tmp_path / "a.lmk"
        write_landmark_file(random_sequence(1), path)
        lines = path.read_text().splitlines()
        fields = lines[1].split(" ")
        fields[5] = "bogus"
        lines[1] = " ".join(fields)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(MalformedRecord):
            read_landmark_file(path)

    def test_out_of_range_coordinate(self, tmp_path):
        path = tmp_path / "a.lmk"
        write_landmark_file(random_sequence(1), path)
        lines = path.read_text().splitlines()
        fields = lines[1].split(" ")
        fields[2] = "1.500000"
        lines[1] = " ".join(fields)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SequenceInvariantError):
            read_landmark_file(path)

    def test_timestamp_jitter_rejected(self):
        seq = random_sequence(3, fps=30.0)
        seq.frames[2].timestamp_ms = seq.frames[1].timestamp_ms + 100  # 3x nominal
        with pytest.raises(SequenceInvariantError):
            validate_sequence(seq)

    def test_invalid_sequence_writes_nothing(self, tmp_path):
        seq = random_sequence(2)
        seq.frames[1].coords = seq.frames[1].coords[:467]
        path = tmp_path / "a.lmk"
        with pytest.raises(LandmarkCountMismatch):
            write_landmark_file(seq, path)
        assert not path.exists()

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_landmark_file(tmp_path / "nope.lmk")

    def test_single_field_corruptions_all_detected(self, tmp_path):
        from fmim.errors import DataError
        path = tmp_path / "a.lmk"
        write_landmark_file(random_sequence(3, seed=9), path)
        pristine = path.read_text()
        rng = np.random.default_rng(10)
        corruptions = 0
        for _ in range(30):
            lines = pristine.splitlines()
            line_no = int(rng.integers(1, len(lines)))
            fields = lines[line_no].split(" ")
            mode = rng.integers(0, 3)
            if mode == 0:
                # range violation: only x/y carry range bounds (z is free)
                lm = int(rng.integers(0, 468))
                idx = 2 + 3 * lm + int(rng.integers(0, 2))
                fields[idx] = "7.500000"
            elif mode == 1:
                del fields[int(rng.integers(0, len(fields)))]  # count violation
            else:
                fields[int(rng.integers(0, len(fields)))] = "junk"
            mutated = "\n".join([*lines[:line_no], " ".join(fields), *lines[line_no + 1:]]) + "\n"
            if mutated == pristine:
                continue
            path.write_text(mutated)
            corruptions += 1
            with pytest.raises(DataError):
                read_landmark_file(path)
        assert corruptions >= 25


class TestManifest:
    def _corpus(self, tmp_path, n=4):
        entries = []
        for i in range(n):
            pid = f"P{i:03d}"
            write_landmark_file(random_sequence(2, seed=i, fps=30.0), tmp_path / f"{pid}.lmk")
            # participant id inside the file must match the manifest
            text = (tmp_path / f"{pid}.lmk").read_text()
            (tmp_path / f"{pid}.lmk").write_text(text.replace("participant=P001", f"participant={pid}"))
            entries.append(ManifestEntry(pid, f"{pid}.lmk", scores(2.0 + i * 0.5), "train"))
        return DatasetManifest(entries=entries, base_dir=str(tmp_path))

    def test_empty_manifest_flagged(self):
        assert validate_manifest(DatasetManifest()) == ["no entries"]

    def test_duplicate_participant_flags_both_indices(self, tmp_path):
        m = self._corpus(tmp_path, n=3)
        m.entries[2].participant_id = m.entries[0].participant_id
        report = validate_manifest(m, check_files=False)
        assert any("entry 2" in line and "entry 0" in line for line in report)

    def test_valid_corpus_produces_empty_report(self, tmp_path):
        m = self._corpus(tmp_path, n=5)
        assert validate_manifest(m) == []

    def test_missing_file_flagged(self, tmp_path):
        m = self._corpus(tmp_path, n=2)
        m.entries[1].landmark_path = "gone.lmk"
        report = validate_manifest(m)
        assert any("does not exist" in line for line in report)

    def test_score_out_of_range_flagged(self, tmp_path):
        m = self._corpus(tmp_path, n=2)
        m.entries[0].scores = IMScores(0.5, 3, 3, 3)
        report = validate_manifest(m, check_files=False)
        assert any("outside [1, 5]" in line for line in report)

    def test_roundtrip(self, tmp_path):
        m = self._corpus(tmp_path, n=3)
        path = tmp_path / "manifest.csv"
        write_manifest(m, path)
        back = read_manifest(path)
        assert [e.participant_id for e in back.entries] == [e.participant_id for e in m.entries]
        assert back.entries[1].scores == m.entries[1].scores
        assert validate_manifest(back) == []


class TestRaterTable:
    def _table(self):
        rows = []
        for pid in ("P001", "P002"):
            for r in ("R1", "R2", "R3"):
                rows.append(RaterRow(r, pid, scores(3.0)))
        return RaterTable(rows=rows)

    def test_three_raters_accepted(self):
        self._table().validate()

    def test_two_raters_rejected(self):
        t = self._table()
        t.rows.pop()
        with pytest.raises(RaterTableError):
            t.validate()

    def test_duplicate_rater_rejected(self):
        t = self._table()
        t.rows[2] = RaterRow("R1", "P001", scores(3.0))
        with pytest.raises(RaterTableError):
            t.validate()

    def test_matrix_grouping(self):
        t = self._table()
        m = t.matrix("honest_self_promotion")
        assert m.shape == (2, 3)

    def test_roundtrip(self, tmp_path):
        t = self._table()
        path = tmp_path / "raters.csv"
        write_rater_csv(t, path)
        back = read_rater_csv(path)
        assert back.rows == t.rows


class TestScoresCsv:
    def test_roundtrip(self, tmp_path):
        data = {"P001": scores(2.5), "P002": scores(4.0)}
        path = tmp_path / "scores.csv"
        write_scores_csv(data, path)
        assert read_scores_csv(path) == data

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("participant_id," + ",".join(IM_DIMENSIONS)
                        + "\nP001,3,3,3,3\nP001,3,3,3,3\n")
        with pytest.raises(MalformedRecord):
            read_scores_csv(path)
