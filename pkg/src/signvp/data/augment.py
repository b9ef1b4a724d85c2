"""Clip-level augmentation: random resized crop, horizontal flip, photometric ops.

All randomness is drawn once per clip and applied identically to every
frame; geometric per-frame jitter would destroy motion cues, so the
photometric operation set is used for the RandAug-style stage.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch


@dataclass(frozen=True)
class RandAugConfig:
    num_ops: int = 4
    magnitude: int = 7  # on a 0..10 scale


@dataclass(frozen=True)
class AugmentConfig:
    crop_scale_range: tuple[float, float] = (0.5, 1.0)
    hflip_prob: float = 0.5
    randaug: RandAugConfig = field(default_factory=RandAugConfig)
    enabled: bool = True


PHOTOMETRIC_OPS = ("brightness", "contrast", "saturation", "posterize", "solarize", "sharpness")

_ASPECT_RANGE = (3.0 / 4.0, 4.0 / 3.0)


def hflip(frames: np.ndarray) -> np.ndarray:
    return frames[:, :, ::-1, :].copy()


def _resize_bilinear(frames: np.ndarray, height: int, width: int) -> np.ndarray:
    x = torch.from_numpy(np.ascontiguousarray(frames)).permute(0, 3, 1, 2)
    y = torch.nn.functional.interpolate(
        x, size=(height, width), mode="bilinear", align_corners=False
    )
    return y.permute(0, 2, 3, 1).contiguous().numpy()


def random_resized_crop(
    frames: np.ndarray, scale_range: tuple[float, float], rng: np.random.Generator
) -> np.ndarray:
    """Crop a random box with area fraction in scale_range, resize back to (H, W)."""
    t, h, w, c = frames.shape
    area = h * w
    for _ in range(10):
        target_area = area * rng.uniform(scale_range[0], scale_range[1])
        aspect = math.exp(rng.uniform(math.log(_ASPECT_RANGE[0]), math.log(_ASPECT_RANGE[1])))
        crop_w = int(round(math.sqrt(target_area * aspect)))
        crop_h = int(round(math.sqrt(target_area / aspect)))
        if 0 < crop_w <= w and 0 < crop_h <= h:
            top = int(rng.integers(0, h - crop_h + 1))
            left = int(rng.integers(0, w - crop_w + 1))
            cropped = frames[:, top : top + crop_h, left : left + crop_w, :]
            if (crop_h, crop_w) == (h, w):
                return cropped.copy()
            return np.clip(_resize_bilinear(cropped, h, w), 0.0, 1.0)
    return frames.copy()  # degenerate scale range: fall back to identity


def _luma(frames: np.ndarray) -> np.ndarray:
    return (
        0.299 * frames[..., 0:1] + 0.587 * frames[..., 1:2] + 0.114 * frames[..., 2:3]
    )


def _blend(a: np.ndarray, b: np.ndarray, factor: float) -> np.ndarray:
    return np.clip(b + factor * (a - b), 0.0, 1.0)


def _apply_photometric(frames: np.ndarray, op: str, magnitude: int, direction: float) -> np.ndarray:
    strength = 0.9 * magnitude / 10.0
    if op == "brightness":
        return _blend(frames, np.zeros_like(frames), 1.0 + direction * strength)
    if op == "contrast":
        mean = _luma(frames).mean()  # clip-global statistic for temporal consistency
        return _blend(frames, np.full_like(frames, mean), 1.0 + direction * strength)
    if op == "saturation":
        gray = np.repeat(_luma(frames), 3, axis=-1)
        return _blend(frames, gray, 1.0 + direction * strength)
    if op == "posterize":
        bits = 8 - int(round(4 * magnitude / 10.0))
        levels = (1 << bits) - 1
        return np.floor(frames * levels + 0.5) / levels
    if op == "solarize":
        threshold = 1.0 - strength
        return np.where(frames >= threshold, 1.0 - frames, frames)
    if op == "sharpness":
        blurred = frames.copy()
        inner = (
            frames[:, :-2, 1:-1]
            + frames[:, 2:, 1:-1]
            + frames[:, 1:-1, :-2]
            + frames[:, 1:-1, 2:]
            + frames[:, 1:-1, 1:-1]
        ) / 5.0
        blurred[:, 1:-1, 1:-1] = inner
        return _blend(frames, blurred, 1.0 + direction * strength)
    raise ValueError(f"unknown photometric op {op!r}")


def augment(frames: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Apply the configured augmentation pipeline; identity when disabled."""
    if not cfg.enabled:
        return frames
    out = random_resized_crop(frames, cfg.crop_scale_range, rng)
    if rng.random() < cfg.hflip_prob:
        out = hflip(out)
    ops = rng.choice(len(PHOTOMETRIC_OPS), size=cfg.randaug.num_ops, replace=True)
    for op_idx in ops:
        direction = 1.0 if rng.random() < 0.5 else -1.0
        out = _apply_photometric(out, PHOTOMETRIC_OPS[int(op_idx)], cfg.randaug.magnitude, direction)
    return out.astype(np.float32)
