"""Offline feature extraction: sliding windows over a frozen encoder.

A clip is first reduced to its strided sampled-frame sequence; windows of
encoder.clip_len sampled frames advance by half a window. Each window is
encoded, spatially mean-pooled to one row per temporal token, and rows at
padded temporal positions are stripped. Window outputs are concatenated in
order; overlapping rows appear once per window unless dedup is set.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..data.clip import VideoClip
from ..encoder.masking import pad_mask_from_frame_mask
from ..encoder.model import HierarchicalVideoEncoder


@dataclass
class FeatureSequence:
    features: np.ndarray  # [S, D] float32
    clip_id: str
    window_offsets: list[int] = field(default_factory=list)  # raw-frame offsets

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"features must be [S >= 1, D], got {self.features.shape}")


def sampled_sequence(clip: VideoClip, temporal_stride: int) -> np.ndarray:
    """The clip's valid frames at the given stride, [ceil(valid/stride), H, W, C]."""
    if clip.valid_length == 0:
        raise ValueError("empty clip")
    idx = np.arange(0, clip.valid_length, temporal_stride)
    return clip.frames[idx]


def extract_features(
    clip: VideoClip,
    encoder: HierarchicalVideoEncoder,
    temporal_stride: int = 2,
    dedup: bool = False,
) -> FeatureSequence:
    """Extract the spatially pooled per-time-step feature sequence of a clip."""
    if encoder.training:
        raise ValueError("encoder must be frozen in eval mode for extraction")
    cfg = encoder.cfg
    window = cfg.clip_len
    stride_w = window // 2
    t_stride = cfg.patch_stride_t

    sampled = sampled_sequence(clip, temporal_stride)
    vs = sampled.shape[0]
    if vs <= window:
        n_windows = 1
    else:
        n_windows = math.ceil((vs - window) / stride_w) + 1

    rows = []
    offsets = []
    dup_rows = (window - stride_w) // t_stride
    with torch.no_grad():
        for k in range(n_windows):
            off = k * stride_w
            seg = sampled[off : off + window]
            n_real = seg.shape[0]
            if n_real < window:
                pad = np.repeat(seg[-1:], window - n_real, axis=0)
                seg = np.concatenate([seg, pad], axis=0)
            frame_valid = np.zeros(window, dtype=bool)
            frame_valid[:n_real] = True
            token_valid = pad_mask_from_frame_mask(frame_valid, t_stride)

            frames = torch.from_numpy(np.ascontiguousarray(seg)).unsqueeze(0)
            pad_t = torch.from_numpy(token_valid).unsqueeze(0)
            feats = encoder(frames, pad_valid=pad_t)
            dense = feats.final_dense()[0]  # [T_tok, H', W', D]
            pooled = dense.mean(dim=(1, 2)).to(torch.float32).numpy()
            valid_rows = pooled[token_valid]
            if dedup and k > 0:
                valid_rows = valid_rows[dup_rows:]
            if valid_rows.shape[0]:
                rows.append(valid_rows)
                offsets.append(off * temporal_stride)

    features = np.concatenate(rows, axis=0)
    return FeatureSequence(features=features, clip_id=clip.clip_id, window_offsets=offsets)
