"""Strided temporal sampling with trailing-repeat padding."""

import math
from typing import Literal

import numpy as np

from .clip import VideoClip


def temporal_sample(
    clip: VideoClip,
    num_frames: int = 128,
    stride: int = 2,
    mode: Literal["train", "eval"] = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample num_frames frames at the given stride.

    When the clip spans at least num_frames * stride valid frames, the crop
    start is uniform random in train mode and 0 in eval mode. Shorter clips
    are read from frame 0 and padded by repeating the last sampled frame;
    the returned boolean mask is True exactly at non-padded positions.
    """
    if num_frames < 1 or stride < 1:
        raise ValueError(f"num_frames and stride must be >= 1, got {num_frames}, {stride}")
    valid = clip.valid_length
    if valid == 0:
        raise ValueError("empty clip")
    span = num_frames * stride

    if valid >= span:
        if mode == "train":
            if rng is None:
                raise ValueError("train mode requires an rng")
            start = int(rng.integers(0, valid - span + 1))
        else:
            start = 0
        idx = start + stride * np.arange(num_frames)
        frames = clip.frames[idx].copy()
        mask = np.ones(num_frames, dtype=bool)
        return frames, mask

    n_real = math.ceil(valid / stride)
    n_real = min(n_real, num_frames)
    idx = stride * np.arange(n_real)
    sampled = clip.frames[idx]
    pad = np.repeat(sampled[-1:], num_frames - n_real, axis=0)
    frames = np.concatenate([sampled, pad], axis=0)
    mask = np.zeros(num_frames, dtype=bool)
    mask[:n_real] = True
    return frames, mask
