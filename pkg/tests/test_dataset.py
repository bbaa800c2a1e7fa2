from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from sketchboard.dataset import (
    DatasetError,
    TripletId,
    assemble_manifest,
    compute_stats,
    validate_triplet,
)


def write_triplet(
    video_dir,
    triplet_id: str,
    appearance: str = "a calm fox, ink style",
    story: str = "the fox walks forward",
    size=(600, 338),
):
    for modality in ("sketch", "static_prompt", "story"):
        (video_dir / modality).mkdir(parents=True, exist_ok=True)
    gray = Image.fromarray(
        np.full((size[1], size[0]), 200, dtype=np.uint8), mode="L"
    )
    gray.save(video_dir / "sketch" / f"{triplet_id}.png")
    (video_dir / "static_prompt" / f"{triplet_id}.txt").write_text(
        appearance, encoding="utf-8"
    )
    (video_dir / "story" / f"{triplet_id}.txt").write_text(story, encoding="utf-8")


def make_corpus(root, subset="self_collected", videos=2, per_video=3):
    for v in range(1, videos + 1):
        video_dir = root / subset / f"video_{v:03d}"
        for k in range(1, per_video + 1):
            write_triplet(video_dir, f"video_{v:03d}_keyframe_{k:04d}")
    return root


class TestTripletId:
    def test_round_trip(self):
        tid = TripletId(video=1, keyframe=42)
        assert str(tid) == "video_001_keyframe_0042"
        assert TripletId.parse(str(tid)) == tid

    def test_rejects_malformed(self):
        for bad in ("video_1_keyframe_0001", "video_001_frame_0001", "x", ""):
            with pytest.raises(DatasetError):
                TripletId.parse(bad)

    def test_range_checks(self):
        with pytest.raises(DatasetError):
            TripletId(video=1000, keyframe=0)
        with pytest.raises(DatasetError):
            TripletId(video=0, keyframe=10000)

    @given(
        video=st.integers(min_value=0, max_value=999),
        keyframe=st.integers(min_value=0, max_value=9999),
    )
    @settings(max_examples=200, deadline=None)
    def test_parse_format_round_trip(self, video, keyframe):
        tid = TripletId(video=video, keyframe=keyframe)
        assert TripletId.parse(str(tid)) == tid


class TestValidateTriplet:
    def test_clean_triplet(self, tmp_path):
        video_dir = tmp_path / "video_001"
        write_triplet(video_dir, "video_001_keyframe_0001")
        assert validate_triplet(video_dir, "video_001_keyframe_0001") == []

    def test_missing_story(self, tmp_path):
        video_dir = tmp_path / "video_001"
        write_triplet(video_dir, "video_001_keyframe_0001")
        (video_dir / "story" / "video_001_keyframe_0001.txt").unlink()
        violations = validate_triplet(video_dir, "video_001_keyframe_0001")
        assert [v.rule for v in violations] == ["missing-modality"]
        assert violations[0].path.startswith("story/")

    def test_whitespace_only_text(self, tmp_path):
        video_dir = tmp_path / "video_001"
        write_triplet(video_dir, "video_001_keyframe_0001", appearance="   \n  ")
        violations = validate_triplet(video_dir, "video_001_keyframe_0001")
        assert [v.rule for v in violations] == ["empty-text"]

    def test_duplicate_modality(self, tmp_path):
        video_dir = tmp_path / "video_001"
        write_triplet(video_dir, "video_001_keyframe_0001")
        extra = video_dir / "sketch" / "video_001_keyframe_0001_v2.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(extra)
        violations = validate_triplet(video_dir, "video_001_keyframe_0001")
        assert [v.rule for v in violations] == ["duplicate-modality"]

    def test_id_mismatch_against_directory(self, tmp_path):
        video_dir = tmp_path / "video_004"
        write_triplet(video_dir, "video_777_keyframe_0001")
        violations = validate_triplet(video_dir, "video_777_keyframe_0001")
        assert [v.rule for v in violations] == ["id-mismatch"]

    def test_residual_sketch_suffix(self, tmp_path):
        video_dir = tmp_path / "video_001"
        write_triplet(video_dir, "video_001_keyframe_0001")
        sketch = video_dir / "sketch" / "video_001_keyframe_0001.png"
        sketch.rename(video_dir / "sketch" / "video_001_keyframe_0001_sketch.png")
        violations = validate_triplet(video_dir, "video_001_keyframe_0001")
        assert [v.rule for v in violations] == ["residual-suffix"]

    def test_multichannel_sketch_rejected(self, tmp_path):
        video_dir = tmp_path / "video_001"
        write_triplet(video_dir, "video_001_keyframe_0001")
        rgb = Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB")
        rgb.save(video_dir / "sketch" / "video_001_keyframe_0001.png")
        violations = validate_triplet(video_dir, "video_001_keyframe_0001")
        assert [v.rule for v in violations] == ["bad-sketch"]

    def test_bad_id_format(self, tmp_path):
        video_dir = tmp_path / "video_001"
        video_dir.mkdir()
        violations = validate_triplet(video_dir, "nonsense")
        assert [v.rule for v in violations] == ["bad-id-format"]


class TestAssembleManifest:
    def test_counts(self, tmp_path):
        make_corpus(tmp_path, videos=2, per_video=3)
        manifest = assemble_manifest(tmp_path)
        assert len(manifest.all_triplets()) == 6
        assert len(manifest.subsets["self_collected"]) == 2
        assert manifest.violations == []

    def test_invalid_excluded_and_recorded(self, tmp_path):
        make_corpus(tmp_path, videos=2, per_video=3)
        bad = tmp_path / "self_collected" / "video_001" / "story" / "video_001_keyframe_0002.txt"
        bad.write_text("", encoding="utf-8")
        manifest = assemble_manifest(tmp_path)
        assert len(manifest.all_triplets()) == 5
        assert len(manifest.violations) == 1
        assert manifest.violations[0].rule == "empty-text"

    def test_empty_root(self, tmp_path):
        manifest = assemble_manifest(tmp_path)
        assert manifest.all_triplets() == []
        assert manifest.violations == []

    def test_not_a_directory(self, tmp_path):
        with pytest.raises(DatasetError):
            assemble_manifest(tmp_path / "missing")

    def test_triplets_sorted_by_keyframe(self, tmp_path):
        video_dir = tmp_path / "subset" / "video_001"
        for k in (3, 1, 2):
            write_triplet(video_dir, f"video_001_keyframe_{k:04d}")
        manifest = assemble_manifest(tmp_path)
        ordinals = [t.id.keyframe for t in manifest.all_triplets()]
        assert ordinals == [1, 2, 3]

    def test_manifest_triplets_all_validate(self, tmp_path):
        make_corpus(tmp_path, videos=2, per_video=2)
        manifest = assemble_manifest(tmp_path)
        for rec in manifest.subsets["self_collected"]:
            video_dir = tmp_path / "self_collected" / rec.video
            for t in rec.triplets:
                assert validate_triplet(video_dir, str(t.id)) == []


class TestComputeStats:
    def test_mini_corpus_mean_median(self, tmp_path):
        root = tmp_path
        video_dir = root / "s" / "video_001"
        for k in (1, 2):
            write_triplet(video_dir, f"video_001_keyframe_{k:04d}")
        video_dir = root / "s" / "video_002"
        for k in (1, 2, 3):
            write_triplet(video_dir, f"video_002_keyframe_{k:04d}")
        stats = compute_stats(assemble_manifest(root))
        assert stats.triplet_count == 5
        assert stats.sequence_count == 2
        assert stats.mean_triplets_per_sequence == 2.5
        assert stats.median_triplets_per_sequence == 2  # lower middle for even counts

    def test_word_counts_and_resolutions(self, tmp_path):
        video_dir = tmp_path / "s" / "video_001"
        write_triplet(
            video_dir,
            "video_001_keyframe_0001",
            appearance="one two three four",
            story="five six",
            size=(600, 338),
        )
        write_triplet(
            video_dir,
            "video_001_keyframe_0002",
            appearance="one two",
            story="five six seven eight",
            size=(600, 600),
        )
        stats = compute_stats(assemble_manifest(tmp_path))
        assert stats.mean_appearance_words == 3.0
        assert stats.mean_motion_words == 3.0
        assert stats.resolution_histogram == {"600x338": 1, "600x600": 1}

    def test_empty_manifest_zeroed(self, tmp_path):
        stats = compute_stats(assemble_manifest(tmp_path))
        assert stats.triplet_count == 0
        assert stats.sequence_count == 0
        assert stats.mean_triplets_per_sequence == 0.0

    def test_permutation_invariance(self, tmp_path):
        make_corpus(tmp_path, videos=3, per_video=2)
        manifest = assemble_manifest(tmp_path)
        stats_a = compute_stats(manifest)
        # reassembling walks the same tree; stats must not depend on order
        stats_b = compute_stats(assemble_manifest(tmp_path))
        assert stats_a == stats_b
