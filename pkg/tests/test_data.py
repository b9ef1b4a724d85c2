import datetime
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signvp.data import (
    AugmentConfig,
    DatasetManifest,
    ManifestRecord,
    RandAugConfig,
    RegionBox,
    SubtitleEntry,
    VideoClip,
    augment,
    blur_regions,
    hflip,
    make_splits,
    parse_srt,
    format_srt,
    read_clip,
    segment_by_subtitles,
    temporal_sample,
    write_clip,
)
from signvp.data.augment import random_resized_crop


def make_video(t=12, h=16, w=16, fps=30.0, valid=None, seed=0, caption=None):
    rng = np.random.default_rng(seed)
    frames = rng.random((t, h, w, 3)).astype(np.float32)
    return VideoClip(
        frames=frames,
        fps=fps,
        valid_length=valid if valid is not None else t,
        caption=caption,
        clip_id=f"clip-{seed}",
    )


class TestVideoClip:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError, match="valid_length"):
            make_video(t=4, valid=5)
        with pytest.raises(ValueError, match="fps"):
            make_video(fps=0)
        bad = np.full((2, 4, 4, 3), 1.5, dtype=np.float32)
        with pytest.raises(ValueError, match="outside"):
            VideoClip(frames=bad, fps=30, valid_length=2)

    def test_disk_roundtrip(self, tmp_path):
        clip = make_video(t=7, h=8, w=10, valid=5)
        path = tmp_path / "c.clip"
        write_clip(path, clip)
        loaded = read_clip(path, caption="hi")
        assert np.array_equal(loaded.frames, clip.frames)
        assert loaded.fps == clip.fps
        assert loaded.valid_length == 5
        assert loaded.caption == "hi"
        assert loaded.clip_id == "c"


class TestSegmentation:
    def test_hand_case(self):
        res = segment_by_subtitles([SubtitleEntry(0.0, 5.6, "hello")], fps=30, total_frames=1000)
        assert res.skipped == 0
        (seg,) = res.segments
        assert (seg.start_frame, seg.end_frame, seg.caption) == (0, 168, "hello")

    def test_empty_entries(self):
        res = segment_by_subtitles([], fps=30, total_frames=10)
        assert res.segments == [] and res.skipped == 0

    def test_overlapping_entries_both_kept(self):
        entries = [SubtitleEntry(0.0, 2.0, "a"), SubtitleEntry(1.0, 3.0, "b")]
        res = segment_by_subtitles(entries, fps=10, total_frames=100)
        assert [(s.start_frame, s.end_frame) for s in res.segments] == [(0, 20), (10, 30)]

    def test_entry_beyond_end_skipped_with_count(self):
        entries = [SubtitleEntry(0.0, 1.0, "a"), SubtitleEntry(50.0, 51.0, "late")]
        res = segment_by_subtitles(entries, fps=10, total_frames=100)
        assert len(res.segments) == 1
        assert res.skipped == 1

    def test_end_clamped_to_total(self):
        res = segment_by_subtitles([SubtitleEntry(9.0, 20.0, "x")], fps=10, total_frames=100)
        assert res.segments[0].end_frame == 100

    @given(
        st.lists(
            st.tuples(
                st.floats(0.0, 20.0, allow_nan=False),
                st.floats(0.05, 5.0, allow_nan=False),
            ),
            min_size=1,
            max_size=8,
        ),
        st.sampled_from([10.0, 24.0, 30.0]),
        st.integers(5, 400),
    )
    @settings(max_examples=80, deadline=None)
    def test_matches_bruteforce_frame_scan(self, timings, fps, total_frames):
        entries = [SubtitleEntry(s, s + d, "t") for s, d in timings]
        res = segment_by_subtitles(entries, fps=fps, total_frames=total_frames)
        produced = iter(res.segments)
        for entry in entries:
            # frame f covers [f/fps, (f+1)/fps); collect frames overlapping the entry
            frames = [
                f
                for f in range(total_frames)
                if f < entry.end_s * fps and f + 1 > entry.start_s * fps
            ]
            # floor/ceil rule may include one extra boundary frame relative to
            # the open-interval scan when start*fps is integral
            if math.floor(entry.start_s * fps) >= total_frames:
                continue
            seg = next(produced)
            assert seg.start_frame == math.floor(entry.start_s * fps)
            assert seg.end_frame == min(math.ceil(entry.end_s * fps), total_frames)
            if frames:
                assert seg.start_frame <= frames[0] and seg.end_frame >= frames[-1] + 1
        assert next(produced, None) is None


class TestSrt:
    def test_parse_roundtrip(self):
        text = "1\n00:00:00,000 --> 00:00:05,600\nhello world\n\n2\n00:01:02,250 --> 00:01:03,000\nsecond line\n"
        entries = parse_srt(text)
        assert entries == [
            SubtitleEntry(0.0, 5.6, "hello world"),
            SubtitleEntry(62.25, 63.0, "second line"),
        ]
        assert parse_srt(format_srt(entries)) == entries

    def test_bad_timestamp_rejected(self):
        with pytest.raises(ValueError):
            parse_srt("1\n00:00 --> 00:01\nx\n")


class TestTemporalSample:
    def test_long_clip_eval(self):
        clip = make_video(t=300)
        frames, mask = temporal_sample(clip, num_frames=128, stride=2, mode="eval")
        assert frames.shape[0] == 128
        assert mask.all()
        assert np.array_equal(frames, clip.frames[np.arange(0, 256, 2)])

    def test_short_clip_padding(self):
        clip = make_video(t=100)
        frames, mask = temporal_sample(clip, num_frames=128, stride=2, mode="eval")
        assert mask.sum() == 50
        assert not mask[50:].any()
        assert np.array_equal(frames[49], clip.frames[98])
        # padded tail repeats the last sampled frame
        assert np.array_equal(frames[50:], np.repeat(clip.frames[98:99], 78, axis=0))

    def test_single_frame_clip(self):
        clip = make_video(t=1)
        frames, mask = temporal_sample(clip, num_frames=128, stride=2, mode="eval")
        assert mask.sum() == 1
        assert np.array_equal(frames[0], clip.frames[0])

    def test_train_start_random_but_seeded(self):
        clip = make_video(t=400)
        a, _ = temporal_sample(clip, 64, 2, "train", np.random.default_rng(3))
        b, _ = temporal_sample(clip, 64, 2, "train", np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_valid_count_rule(self):
        for valid in (1, 2, 3, 17, 64, 200, 256, 300):
            clip = make_video(t=max(valid, 1), valid=valid)
            _, mask = temporal_sample(clip, 128, 2, "eval")
            assert mask.sum() == min(128, math.ceil(valid / 2))

    def test_empty_clip_rejected(self):
        clip = make_video(t=4)
        object.__setattr__ if False else setattr(clip, "valid_length", 0)
        with pytest.raises(ValueError, match="empty clip"):
            temporal_sample(clip, 16, 2, "eval")


def gaussian_blur_oracle(patch: np.ndarray, sigma: float) -> np.ndarray:
    """Dense 2-D Gaussian convolution with symmetric padding, float64."""
    radius = int(4.0 * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-(x**2) / (2 * sigma**2))
    k1 /= k1.sum()
    kernel = np.outer(k1, k1)
    padded = np.pad(patch.astype(np.float64), radius, mode="symmetric")
    out = np.empty_like(patch, dtype=np.float64)
    for i in range(patch.shape[0]):
        for j in range(patch.shape[1]):
            out[i, j] = (kernel * padded[i : i + 2 * radius + 1, j : j + 2 * radius + 1]).sum()
    return out


class TestBlur:
    def test_sigma_zero_identity(self):
        clip = make_video(t=3)
        boxes = [RegionBox((0, 2), (2, 2, 10, 10))]
        out = blur_regions(clip.frames, boxes, sigma=0.0)
        assert np.array_equal(out, clip.frames)

    def test_constant_region_unchanged(self):
        frames = np.full((2, 16, 16, 3), 0.25, dtype=np.float32)
        out = blur_regions(frames, [RegionBox((0, 1), (2, 2, 12, 12))], sigma=3.0)
        assert np.allclose(out, 0.25, atol=1e-6)

    def test_outside_boxes_bit_identical(self):
        clip = make_video(t=4, h=20, w=20)
        boxes = [RegionBox((1, 2), (4, 5, 12, 13))]
        out = blur_regions(clip.frames, boxes, sigma=2.0)
        inside = np.zeros_like(clip.frames, dtype=bool)
        inside[1:3, 5:13, 4:12, :] = True
        assert np.array_equal(out[~inside], clip.frames[~inside])

    def test_impulse_matches_dense_convolution(self):
        frames = np.zeros((1, 24, 24, 3), dtype=np.float32)
        frames[0, 11, 12, :] = 1.0
        box = RegionBox((0, 0), (3, 4, 21, 20))
        out = blur_regions(frames, [box], sigma=2.0)
        patch = frames[0, 4:20, 3:21, 0]
        expected = gaussian_blur_oracle(patch, 2.0)
        assert np.abs(out[0, 4:20, 3:21, 0] - expected).max() < 1e-6

    def test_random_content_matches_dense_convolution(self):
        rng = np.random.default_rng(5)
        frames = rng.random((2, 18, 18, 3)).astype(np.float32)
        box = RegionBox((0, 1), (2, 3, 15, 16))
        out = blur_regions(frames, [box], sigma=1.3)
        for t in range(2):
            for c in range(3):
                expected = gaussian_blur_oracle(frames[t, 3:16, 2:15, c], 1.3)
                assert np.abs(out[t, 3:16, 2:15, c] - expected).max() < 1e-6

    def test_bad_box_rejected(self):
        clip = make_video(t=2)
        with pytest.raises(ValueError, match="box"):
            blur_regions(clip.frames, [RegionBox((0, 1), (4, 4, 2, 8))], sigma=1.0)


class TestAugment:
    def test_disabled_identity(self):
        clip = make_video()
        cfg = AugmentConfig(enabled=False)
        out = augment(clip.frames, cfg, np.random.default_rng(0))
        assert np.array_equal(out, clip.frames)

    def test_hflip_involution(self):
        clip = make_video()
        assert np.array_equal(hflip(hflip(clip.frames)), clip.frames)

    def test_deterministic_given_seed(self):
        clip = make_video(t=6, h=24, w=24)
        cfg = AugmentConfig(randaug=RandAugConfig(num_ops=4, magnitude=7))
        a = augment(clip.frames, cfg, np.random.default_rng(11))
        b = augment(clip.frames, cfg, np.random.default_rng(11))
        assert np.array_equal(a, b)

    def test_output_range_and_shape(self):
        clip = make_video(t=5, h=24, w=24)
        out = augment(clip.frames, AugmentConfig(), np.random.default_rng(2))
        assert out.shape == clip.frames.shape
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_temporal_consistency_of_crop(self):
        # constant-in-time video stays constant in time after augmentation
        frame = np.random.default_rng(1).random((1, 24, 24, 3)).astype(np.float32)
        frames = np.repeat(frame, 6, axis=0)
        out = augment(frames, AugmentConfig(), np.random.default_rng(4))
        for t in range(1, 6):
            assert np.array_equal(out[t], out[0])

    def test_full_scale_crop_is_identity(self):
        clip = make_video(t=3, h=20, w=20)
        out = random_resized_crop(clip.frames, (1.0, 1.0), np.random.default_rng(0))
        assert np.allclose(out, clip.frames, atol=1e-6)


def make_manifest(n=100, with_dates=True):
    records = [
        ManifestRecord(
            clip_id=f"c{i:04d}",
            path=f"clips/c{i:04d}.clip",
            caption="x",
            split="train",
            date=datetime.date(2021, 1, 1) + datetime.timedelta(days=i * 7) if with_dates else None,
        )
        for i in range(n)
    ]
    return DatasetManifest(records=records, metadata={"fps": 25.0})


class TestSplits:
    def test_default_fractions_on_100(self):
        split = make_splits(make_manifest(100), seed=1)
        counts = {s: len(split.subset(s)) for s in ("train", "validation", "test")}
        assert counts == {"train": 85, "validation": 6, "test": 9}

    def test_partition_exact(self):
        split = make_splits(make_manifest(37), seed=2)
        ids = [r.clip_id for r in split.records]
        assert sorted(ids) == sorted(r.clip_id for r in make_manifest(37).records)
        by_split = [set(r.clip_id for r in split.subset(s)) for s in ("train", "validation", "test")]
        assert sum(len(s) for s in by_split) == 37
        assert not (by_split[0] & by_split[1]) and not (by_split[1] & by_split[2])

    def test_cutoff_respected(self):
        cutoff = datetime.date(2021, 12, 1)
        split = make_splits(make_manifest(100), eval_cutoff_date=cutoff, seed=3)
        for s in ("validation", "test"):
            for record in split.subset(s):
                assert record.date >= cutoff

    def test_all_train_fractions(self):
        split = make_splits(make_manifest(10), fractions=(1.0, 0.0, 0.0), seed=0)
        assert len(split.subset("train")) == 10

    def test_shortfall_error(self):
        cutoff = datetime.date(2022, 11, 1)  # only a few records this late
        with pytest.raises(ValueError, match="short by"):
            make_splits(make_manifest(100), eval_cutoff_date=cutoff, seed=0)

    def test_deterministic(self):
        a = make_splits(make_manifest(50), seed=9)
        b = make_splits(make_manifest(50), seed=9)
        assert [r.split for r in a.records] == [r.split for r in b.records]

    def test_bad_fractions_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            make_splits(make_manifest(10), fractions=(0.5, 0.2, 0.2))

    def test_manifest_roundtrip(self, tmp_path):
        manifest = make_splits(make_manifest(12), seed=0)
        path = tmp_path / "m.jsonl"
        manifest.save(path)
        loaded = DatasetManifest.load(path)
        assert loaded.records == manifest.records
        assert loaded.metadata == manifest.metadata

    def test_duplicate_ids_rejected(self):
        rec = ManifestRecord("a", "p", None, "train")
        with pytest.raises(ValueError, match="duplicate"):
            DatasetManifest(records=[rec, rec], metadata={})
