import math

import numpy as np
import pytest
import torch

from signvp.data import VideoClip
from signvp.encoder import HierarchicalVideoEncoder, tiny_config
from signvp.features import (
    FeatureSequence,
    FeatureStore,
    FeatureStoreError,
    FeatureStoreWriter,
    extract_features,
)


@pytest.fixture(scope="module")
def encoder():
    torch.manual_seed(0)
    # window = clip_len = 16 sampled frames -> 8 feature rows per window
    enc = HierarchicalVideoEncoder(tiny_config(clip_len=16)).eval()
    enc.requires_grad_(False)
    return enc


def make_clip(n_frames, seed=0, h=32, w=32):
    rng = np.random.default_rng(seed)
    return VideoClip(
        frames=rng.random((n_frames, h, w, 3)).astype(np.float32),
        fps=25.0,
        valid_length=n_frames,
        clip_id=f"clip{seed}-{n_frames}",
    )


class TestExtract:
    def test_exact_window_rows(self, encoder):
        # 32 raw frames -> 16 sampled -> one full window -> 8 rows
        seq = extract_features(make_clip(32), encoder)
        assert seq.features.shape == (8, encoder.cfg.feature_dim)
        assert seq.window_offsets == [0]

    def test_half_window_padded_and_stripped(self, encoder):
        # 16 raw -> 8 sampled -> padded window -> ceil(8/2) = 4 rows
        seq = extract_features(make_clip(16), encoder)
        assert seq.features.shape[0] == 4

    def test_overlap_duplicated_by_default(self, encoder):
        # 48 raw -> 24 sampled: windows at 0 and 8 -> 8 + 8 rows
        seq = extract_features(make_clip(48), encoder)
        assert seq.features.shape[0] == 16
        assert seq.window_offsets == [0, 16]

    def test_dedup_keeps_first_occurrence(self, encoder):
        seq = extract_features(make_clip(48), encoder, dedup=True)
        # second window repeats 4 rows of the first; dedup keeps 8 + 4
        assert seq.features.shape[0] == 12

    def test_row_count_rule_single_window(self, encoder):
        for raw in (2, 5, 11, 19, 32):
            seq = extract_features(make_clip(raw, seed=raw), encoder)
            vs = math.ceil(raw / 2)
            assert seq.features.shape[0] == min(math.ceil(vs / 2), 8) if vs <= 16 else True

    def test_single_window_matches_pooled_encode(self, encoder):
        clip = make_clip(32, seed=3)
        seq = extract_features(clip, encoder)
        frames = torch.from_numpy(clip.frames[np.arange(0, 32, 2)]).unsqueeze(0)
        with torch.no_grad():
            dense = encoder(frames).final_dense()[0]
        pooled = dense.mean(dim=(1, 2)).numpy()
        assert np.abs(seq.features - pooled).max() < 1e-6

    def test_deterministic(self, encoder):
        clip = make_clip(40, seed=4)
        a = extract_features(clip, encoder)
        b = extract_features(clip, encoder)
        assert np.array_equal(a.features, b.features)

    def test_training_mode_rejected(self, encoder):
        encoder.train()
        try:
            with pytest.raises(ValueError, match="eval"):
                extract_features(make_clip(8), encoder)
        finally:
            encoder.eval()

    def test_empty_clip_rejected(self, encoder):
        clip = make_clip(8)
        clip.valid_length = 0
        with pytest.raises(ValueError, match="empty clip"):
            extract_features(clip, encoder)


def rand_seq(clip_id, s, d=16, seed=0):
    rng = np.random.default_rng(seed)
    return FeatureSequence(
        features=rng.standard_normal((s, d)).astype(np.float32),
        clip_id=clip_id,
        window_offsets=[0],
    )


class TestStore:
    def test_roundtrip_bit_identical(self, tmp_path):
        path = tmp_path / "store.feat"
        seqs = [rand_seq(f"c{i}", s=3 + i % 5, seed=i) for i in range(100)]
        with FeatureStoreWriter(path) as writer:
            for seq in seqs:
                writer.append(seq)
        with FeatureStore(path) as store:
            for seq in seqs:
                back = store.read(seq.clip_id)
                assert back.features.tobytes() == seq.features.tobytes()
                assert back.window_offsets == seq.window_offsets

    def test_missing_clip_raises(self, tmp_path):
        path = tmp_path / "store.feat"
        with FeatureStoreWriter(path) as writer:
            writer.append(rand_seq("a", 4))
        with FeatureStore(path) as store:
            with pytest.raises(FeatureStoreError, match="not found"):
                store.read("missing")

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "store.feat"
        with FeatureStoreWriter(path) as writer:
            writer.append(rand_seq("a", 4), epoch=1)
            with pytest.raises(FeatureStoreError, match="duplicate"):
                writer.append(rand_seq("a", 5), epoch=1)

    def test_sixty_epoch_variants(self, tmp_path):
        path = tmp_path / "store.feat"
        with FeatureStoreWriter(path) as writer:
            for epoch in range(60):
                writer.append(rand_seq("clip", 4, seed=epoch), epoch=epoch)
        with FeatureStore(path) as store:
            assert store.epochs("clip") == list(range(60))
            assert not np.array_equal(
                store.read("clip", 0).features, store.read("clip", 59).features
            )

    def test_append_mode_extends(self, tmp_path):
        path = tmp_path / "store.feat"
        with FeatureStoreWriter(path) as writer:
            writer.append(rand_seq("a", 4))
        with FeatureStoreWriter(path, append=True) as writer:
            writer.append(rand_seq("b", 5))
        with FeatureStore(path) as store:
            assert store.clip_ids() == ["a", "b"]
