"""Stage-I training loop: masked-autoencoder pretraining over a clip manifest.

Sample randomness is stateless: every (load, repeat) slot derives its own
generator from (seed, pass, position, repeat), so any step's batch can be
reconstructed without replaying the stream and resumption is exact. Each
loaded clip contributes repeated_sampling consecutive, independently
augmented and masked samples.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from ..data.augment import AugmentConfig, augment
from ..data.clip import read_clip
from ..data.manifest import DatasetManifest, ManifestRecord
from ..data.sampling import temporal_sample
from ..encoder.config import EncoderConfig
from ..encoder.masking import pad_mask_from_frame_mask, sample_mask
from ..encoder.model import HierarchicalVideoEncoder
from ..state import load_checkpoint, restore_rng, save_checkpoint
from .decoder import MAEDecoderConfig, MaskedAutoencoder
from .schedule import PretrainSchedule, lr_at

_ORDER_STREAM = 11
_SAMPLE_STREAM = 12


@dataclass
class MAETrainConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: MAEDecoderConfig = field(default_factory=MAEDecoderConfig)
    schedule: PretrainSchedule = field(default_factory=PretrainSchedule)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    temporal_stride: int = 2
    seed: int = 0
    checkpoint_every_epochs: Optional[float] = None
    mask_redraw_limit: int = 1000

    def echo(self) -> dict:
        return {
            "encoder": asdict(self.encoder),
            "decoder": asdict(self.decoder),
            "schedule": asdict(self.schedule),
            "augment": asdict(self.augment),
            "temporal_stride": self.temporal_stride,
            "seed": self.seed,
        }


@dataclass
class MAETrainResult:
    final_checkpoint: Path
    metrics_path: Path
    losses: list[float]
    steps: int


class SampleStream:
    """Random-access view of the shuffled, repeated-sampling training stream."""

    def __init__(self, records: list[ManifestRecord], seed: int, repeated_sampling: int):
        if not records:
            raise ValueError("manifest has no training records")
        self.records = records
        self.seed = seed
        self.repeated_sampling = repeated_sampling
        self._perms: dict[int, np.ndarray] = {}

    def _perm(self, pass_idx: int) -> np.ndarray:
        if pass_idx not in self._perms:
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, _ORDER_STREAM, pass_idx]))
            self._perms[pass_idx] = rng.permutation(len(self.records))
        return self._perms[pass_idx]

    def descriptor(self, sample_idx: int) -> tuple[ManifestRecord, int, int]:
        """(record, load_index, repeat) for the sample at a global index."""
        load_index = sample_idx // self.repeated_sampling
        rep = sample_idx % self.repeated_sampling
        pass_idx, pos = divmod(load_index, len(self.records))
        record = self.records[self._perm(pass_idx)[pos]]
        return record, load_index, rep

    def sample_rng(self, load_index: int, rep: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, _SAMPLE_STREAM, load_index, rep])
        )


def build_sample(
    record: ManifestRecord,
    base_dir: Path,
    encoder_cfg: EncoderConfig,
    aug_cfg: AugmentConfig,
    temporal_stride: int,
    rng: np.random.Generator,
    mask_redraw_limit: int = 1000,
) -> dict:
    """Load, sample, augment, and mask one clip into model-ready arrays."""
    clip = read_clip(Path(base_dir) / record.path, caption=record.caption, clip_id=record.clip_id)
    frames, frame_valid = temporal_sample(
        clip, num_frames=encoder_cfg.clip_len, stride=temporal_stride, mode="train", rng=rng
    )
    frames = augment(frames, aug_cfg, rng)
    pad_valid = pad_mask_from_frame_mask(frame_valid, encoder_cfg.patch_stride_t)

    token_valid_units = pad_valid.reshape(-1, encoder_cfg.mask_unit[0]).any(axis=1)
    n_spatial = encoder_cfg.unit_grid[1] * encoder_cfg.unit_grid[2]
    unit_valid = np.repeat(token_valid_units, n_spatial)
    mask = sample_mask(encoder_cfg.unit_grid, encoder_cfg.mask_ratio, rng)
    # the loss needs at least one masked unit at a valid temporal position
    for _ in range(mask_redraw_limit):
        if (mask & unit_valid).any() or not mask.any():
            break
        mask = sample_mask(encoder_cfg.unit_grid, encoder_cfg.mask_ratio, rng)
    else:
        raise RuntimeError(f"clip {record.clip_id}: could not draw a usable mask")
    return {
        "frames": frames,
        "pad_valid": pad_valid,
        "mask": mask,
        "clip_id": record.clip_id,
        "caption": record.caption,
    }


def collate(samples: list[dict]) -> dict:
    batch = {
        "frames": torch.from_numpy(np.stack([s["frames"] for s in samples])),
        "pad_valid": torch.from_numpy(np.stack([s["pad_valid"] for s in samples])),
        "mask": torch.from_numpy(np.stack([s["mask"] for s in samples])),
        "clip_ids": [s["clip_id"] for s in samples],
        "captions": [s["caption"] for s in samples],
    }
    return batch


def make_optimizer(params, schedule: PretrainSchedule) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        params, lr=schedule.peak_lr, betas=schedule.betas, weight_decay=schedule.weight_decay
    )


def set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def batch_for_step(
    step: int,
    stream: SampleStream,
    base_dir: Path,
    cfg: MAETrainConfig,
) -> dict:
    samples = []
    batch_size = cfg.schedule.effective_batch
    for i in range(step * batch_size, (step + 1) * batch_size):
        record, load_index, rep = stream.descriptor(i)
        rng = stream.sample_rng(load_index, rep)
        samples.append(
            build_sample(
                record,
                base_dir,
                cfg.encoder,
                cfg.augment,
                cfg.temporal_stride,
                rng,
                cfg.mask_redraw_limit,
            )
        )
    return collate(samples)


def train_mae(
    cfg: MAETrainConfig,
    manifest: DatasetManifest,
    base_dir: Path,
    out_dir: Path,
    resume: Optional[Path] = None,
    on_step: Optional[Callable[[dict], None]] = None,
) -> MAETrainResult:
    """Run Stage-I pretraining; returns the final checkpoint and metrics paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = manifest.subset("train")
    stream = SampleStream(records, cfg.seed, cfg.schedule.repeated_sampling)

    n = len(records)
    batch = cfg.schedule.effective_batch
    total_steps = max(1, math.ceil(cfg.schedule.effective_epochs * n / batch))
    steps_per_epoch = n / batch
    ckpt_every = cfg.checkpoint_every_epochs or max(1.0, cfg.schedule.effective_epochs / 4)
    ckpt_every_steps = max(1, round(ckpt_every * steps_per_epoch))

    torch.manual_seed(cfg.seed)
    model = MaskedAutoencoder(HierarchicalVideoEncoder(cfg.encoder), cfg.decoder)
    optimizer = make_optimizer(model.parameters(), cfg.schedule)

    start_step = 0
    if resume is not None:
        payload = load_checkpoint(resume)
        model.load_state_dict(payload["models"]["mae"])
        optimizer.load_state_dict(payload["optimizers"]["mae"])
        restore_rng(payload)
        start_step = payload["step"]

    metrics_path = out_dir / "metrics.jsonl"
    metrics_fh = open(metrics_path, "a" if resume is not None else "w")
    losses: list[float] = []
    model.train()

    def checkpoint(step: int, name: str) -> Path:
        path = out_dir / name
        save_checkpoint(
            path,
            step=step,
            models={"mae": model.state_dict()},
            optimizers={"mae": optimizer.state_dict()},
            config_echo=cfg.echo(),
            extra={"samples_seen": step * batch, "stage": "pretrain"},
        )
        return path

    try:
        for step in range(start_step, total_steps):
            data = batch_for_step(step, stream, base_dir, cfg)
            lr = lr_at(min(step, total_steps), cfg.schedule, steps_per_epoch=total_steps / cfg.schedule.effective_epochs)
            set_lr(optimizer, lr)
            optimizer.zero_grad(set_to_none=True)
            loss, _ = model(data["frames"], mask=data["mask"], pad_valid=data["pad_valid"])
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at step {step}; batch clips: {data['clip_ids']}"
                )
            loss.backward()
            if cfg.schedule.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.schedule.grad_clip)
            optimizer.step()

            value = float(loss.detach())
            losses.append(value)
            line = {
                "step": step,
                "loss": value,
                "lr": lr,
                "epoch": round((step + 1) * batch / n, 6),
            }
            metrics_fh.write(json.dumps(line, sort_keys=True) + "\n")
            metrics_fh.flush()
            if on_step is not None:
                on_step(line)
            if (step + 1) % ckpt_every_steps == 0 and step + 1 < total_steps:
                checkpoint(step + 1, f"checkpoint_{step + 1:07d}.pt")
    finally:
        metrics_fh.close()

    final = checkpoint(total_steps, "checkpoint_final.pt")
    return MAETrainResult(
        final_checkpoint=final, metrics_path=metrics_path, losses=losses, steps=total_steps
    )
