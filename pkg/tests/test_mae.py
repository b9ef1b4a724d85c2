import json
import math

import numpy as np
import pytest
import torch

from helpers import central_difference_check
from signvp.data import AugmentConfig, ToySignSpec, generate_toy_dataset
from signvp.encoder import HierarchicalVideoEncoder, sample_mask, tiny_config
from signvp.mae import (
    MAEDecoderConfig,
    MAETrainConfig,
    MaskedAutoencoder,
    PretrainSchedule,
    lr_at,
    masked_reconstruction_loss,
    pixel_targets,
    train_mae,
)


def tiny_mae(seed=0, drop_path=0.0):
    torch.manual_seed(seed)
    cfg = tiny_config(drop_path=drop_path)
    encoder = HierarchicalVideoEncoder(cfg)
    return MaskedAutoencoder(encoder, MAEDecoderConfig(blocks=2, heads=2, dim=16))


class TestPixelTargets:
    def test_constant_block_is_zero(self):
        cfg = tiny_config()
        frames = torch.full((1, cfg.clip_len, cfg.img_size, cfg.img_size, 3), 0.7)
        targets = pixel_targets(frames, cfg, normalize=True)
        assert targets.abs().max() < 1e-3

    def test_half_zeros_half_ones(self):
        cfg = tiny_config()
        # alternate 0/1 along the channel axis so each token block is half and half
        frames = torch.zeros(1, cfg.clip_len, cfg.img_size, cfg.img_size, 3)
        frames[..., ::2] = 1.0  # channels 0 and 2 on, channel 1 off -> not half; use width instead
        frames = torch.zeros(1, cfg.clip_len, cfg.img_size, cfg.img_size, 3)
        frames[:, :, :, ::2, :] = 1.0  # half the columns of every block
        targets = pixel_targets(frames, cfg, normalize=True)
        # mean 0.5, population std 0.5 -> values are +-1 (up to eps in the variance)
        assert torch.allclose(targets.abs(), torch.ones_like(targets), atol=1e-4)

    def test_unnormalized_raw_pixels(self):
        cfg = tiny_config()
        g = torch.Generator().manual_seed(0)
        frames = torch.rand(1, cfg.clip_len, cfg.img_size, cfg.img_size, 3, generator=g)
        raw = pixel_targets(frames, cfg, normalize=False)
        block = cfg.patch_stride_t * cfg.patch_stride_s**2 * 3
        assert raw.shape == (1, np.prod(cfg.token_grid), block)
        assert torch.equal(raw.reshape(-1).sort().values, frames.reshape(-1).sort().values)

    def test_normalized_stats(self):
        cfg = tiny_config()
        g = torch.Generator().manual_seed(1)
        frames = torch.rand(2, cfg.clip_len, cfg.img_size, cfg.img_size, 3, generator=g)
        z = pixel_targets(frames, cfg, normalize=True)
        assert z.mean(dim=-1).abs().max() < 1e-5
        assert (z.var(dim=-1, unbiased=False) - 1).abs().max() < 1e-3


class TestMaskedLoss:
    def test_perfect_prediction_zero(self):
        target = torch.randn(1, 10, 8)
        select = torch.zeros(1, 10, dtype=torch.bool)
        select[0, 3:7] = True
        assert masked_reconstruction_loss(target.clone(), target, select).item() == 0.0

    def test_zero_prediction_near_one_on_noise(self):
        cfg = tiny_config()
        g = torch.Generator().manual_seed(2)
        # enough clips for >= 1e4 tokens: 256 tokens per tiny clip
        frames = torch.rand(48, cfg.clip_len, cfg.img_size, cfg.img_size, 3, generator=g)
        target = pixel_targets(frames, cfg, normalize=True)
        select = torch.ones(target.shape[:2], dtype=torch.bool)
        assert select.sum() >= 10_000
        loss = masked_reconstruction_loss(torch.zeros_like(target), target, select)
        assert 0.95 <= loss.item() <= 1.05

    def test_loss_ignores_unselected_positions_bitwise(self):
        g = torch.Generator().manual_seed(3)
        pred = torch.randn(2, 12, 6, generator=g)
        target = torch.randn(2, 12, 6, generator=g)
        select = torch.rand(2, 12, generator=g) < 0.4
        base = masked_reconstruction_loss(pred, target, select)
        tampered = pred.clone()
        tampered[~select] = 999.0
        assert torch.equal(masked_reconstruction_loss(tampered, target, select), base)

    def test_no_selected_token_rejected(self):
        with pytest.raises(ValueError, match="MAE loss undefined"):
            masked_reconstruction_loss(
                torch.zeros(1, 4, 2), torch.zeros(1, 4, 2), torch.zeros(1, 4, dtype=torch.bool)
            )


class TestMAEForward:
    def test_loss_finite_and_recon_shape(self):
        model = tiny_mae()
        cfg = model.encoder.cfg
        g = torch.Generator().manual_seed(0)
        frames = torch.rand(2, cfg.clip_len, cfg.img_size, cfg.img_size, 3, generator=g)
        rng = np.random.default_rng(0)
        mask = torch.from_numpy(np.stack([sample_mask(cfg.unit_grid, 0.5, rng) for _ in range(2)]))
        loss, recon = model(frames, mask=mask)
        assert torch.isfinite(loss)
        assert recon.shape == frames.shape

    def test_visible_tokens_keep_original_pixels(self):
        model = tiny_mae()
        cfg = model.encoder.cfg
        g = torch.Generator().manual_seed(1)
        frames = torch.rand(1, cfg.clip_len, cfg.img_size, cfg.img_size, 3, generator=g)
        mask = np.zeros(cfg.num_units, dtype=bool)
        mask[:2] = True  # first two temporal units masked
        _, recon = model(frames, mask=torch.from_numpy(mask[None]))
        mt = cfg.mask_unit[0]
        visible_from = 2 * mt * cfg.patch_stride_t
        assert torch.allclose(recon[:, visible_from:], frames[:, visible_from:], atol=1e-6)
        assert not torch.allclose(recon[:, :visible_from], frames[:, :visible_from], atol=1e-3)

    def test_gradient_check_float64(self):
        model = tiny_mae().double()
        model.eval()  # drop-path off; deterministic forward
        cfg = model.encoder.cfg
        g = torch.Generator().manual_seed(4)
        frames = torch.rand(1, cfg.clip_len, cfg.img_size, cfg.img_size, 3, generator=g).double()
        rng = np.random.default_rng(4)
        mask = torch.from_numpy(sample_mask(cfg.unit_grid, 0.5, rng)[None])
        pad = torch.ones(1, cfg.token_grid[0], dtype=torch.bool)
        pad[0, -1] = False

        def loss_fn():
            loss, _ = model(frames, mask=mask, pad_valid=pad)
            return loss

        checked, max_rel = central_difference_check(
            loss_fn, list(model.parameters()), n_coords=60, seed=0
        )
        assert checked == 60


class TestSchedule:
    def test_peak_at_warmup_end(self):
        s = PretrainSchedule()
        assert lr_at(120, s) == pytest.approx(8e-4)

    def test_min_at_total(self):
        s = PretrainSchedule()
        assert lr_at(800, s) == pytest.approx(1e-5)

    def test_linear_midpoint(self):
        s = PretrainSchedule()
        assert lr_at(60, s) == pytest.approx(4e-4)

    def test_continuous_at_junction(self):
        s = PretrainSchedule(effective_epochs=100, warmup_epochs=10, peak_lr=1e-3, min_lr=1e-5)
        before = lr_at(10 - 1e-9, s)
        after = lr_at(10 + 1e-9, s)
        assert before == pytest.approx(after, rel=1e-6)

    def test_monotone_nonincreasing_after_peak(self):
        s = PretrainSchedule(effective_epochs=50, warmup_epochs=5)
        values = [lr_at(x, s) for x in np.linspace(5, 50, 200)]
        assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))

    def test_invalid_schedules_rejected(self):
        with pytest.raises(ValueError):
            PretrainSchedule(effective_epochs=10, warmup_epochs=10)
        with pytest.raises(ValueError):
            PretrainSchedule(min_lr=1e-3, peak_lr=1e-4)

    def test_step_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            lr_at(801, PretrainSchedule())


@pytest.fixture(scope="module")
def toy_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    spec = ToySignSpec(vocab_size=8, sentence_length_range=(1, 4), seed=11)
    manifest = generate_toy_dataset(spec, 24, root)
    return spec, manifest, root


def toy_train_config(seed=0, epochs=2, batch=4, rs=2, drop_path=0.0, ckpt_every=None):
    return MAETrainConfig(
        encoder=tiny_config(clip_len=16, drop_path=drop_path),
        decoder=MAEDecoderConfig(blocks=1, heads=2, dim=16),
        schedule=PretrainSchedule(
            effective_epochs=epochs,
            warmup_epochs=epochs / 4,
            peak_lr=1e-3,
            min_lr=1e-5,
            effective_batch=batch,
            repeated_sampling=rs,
        ),
        augment=AugmentConfig(enabled=False),
        temporal_stride=2,
        seed=seed,
        checkpoint_every_epochs=ckpt_every,
    )


class TestTrainMAE:
    def test_smoke_and_metrics_stream(self, toy_data, tmp_path):
        _, manifest, root = toy_data
        result = train_mae(toy_train_config(), manifest, root, tmp_path / "run")
        assert result.final_checkpoint.exists()
        lines = [json.loads(l) for l in result.metrics_path.read_text().splitlines()]
        assert len(lines) == result.steps
        assert all(set(l) == {"step", "loss", "lr", "epoch"} for l in lines)
        assert all(math.isfinite(l["loss"]) for l in lines)

    def test_rerun_byte_identical(self, toy_data, tmp_path):
        _, manifest, root = toy_data
        a = train_mae(toy_train_config(seed=5), manifest, root, tmp_path / "a")
        b = train_mae(toy_train_config(seed=5), manifest, root, tmp_path / "b")
        assert a.metrics_path.read_bytes() == b.metrics_path.read_bytes()

    def test_resume_bit_identical(self, toy_data, tmp_path):
        _, manifest, root = toy_data
        cfg = toy_train_config(seed=7, epochs=4, drop_path=0.2, ckpt_every=2.0)
        full = train_mae(cfg, manifest, root, tmp_path / "full")
        mid_ckpts = sorted((tmp_path / "full").glob("checkpoint_0*.pt"))
        assert mid_ckpts, "expected a mid-run checkpoint"
        resumed = train_mae(cfg, manifest, root, tmp_path / "resumed", resume=mid_ckpts[0])
        k = full.steps - len(resumed.losses)
        assert resumed.losses == full.losses[k:]

    def test_repeated_sampling_halves_distinct_clips(self, toy_data, tmp_path):
        _, manifest, root = toy_data
        from signvp.mae import SampleStream

        records = manifest.subset("train")
        n = len(records)
        stream2 = SampleStream(records, seed=0, repeated_sampling=2)
        ids = [stream2.descriptor(i)[0].clip_id for i in range(n)]
        assert len(set(ids)) == math.ceil(n / 2)
        stream1 = SampleStream(records, seed=0, repeated_sampling=1)
        ids1 = [stream1.descriptor(i)[0].clip_id for i in range(n)]
        assert len(set(ids1)) == n
