"""Mask-unit sampling and temporal-padding masks."""

import math

import numpy as np


def sample_mask(
    unit_grid: tuple[int, int, int], mask_ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """Sample a boolean mask over the flattened unit grid, True = masked.

    Exactly floor(mask_ratio * num_units) units are masked, chosen uniformly
    without replacement.
    """
    if not (0.0 <= mask_ratio < 1.0):
        raise ValueError("no visible tokens: mask_ratio must be in [0, 1)")
    num_units = int(np.prod(unit_grid))
    n_masked = math.floor(mask_ratio * num_units)
    mask = np.zeros(num_units, dtype=bool)
    if n_masked:
        mask[rng.choice(num_units, size=n_masked, replace=False)] = True
    return mask


def pad_mask_from_frame_mask(frame_valid: np.ndarray, patch_stride_t: int) -> np.ndarray:
    """Collapse a per-frame validity mask to per-temporal-token validity.

    A token is valid when any frame in its span is valid, matching the
    ceil(valid / stride) accounting used everywhere else.
    """
    t = frame_valid.shape[0]
    if t % patch_stride_t:
        raise ValueError(f"frame count {t} not divisible by temporal patch stride {patch_stride_t}")
    return frame_valid.reshape(t // patch_stride_t, patch_stride_t).any(axis=1)


def validate_pad_mask(token_valid: np.ndarray) -> int:
    """Check the valid-prefix/invalid-suffix structure; returns the valid count."""
    n_valid = int(token_valid.sum())
    if not token_valid[:n_valid].all():
        raise ValueError("pad mask must be a valid prefix followed by an invalid suffix")
    if n_valid == 0:
        raise ValueError("pad mask with no valid positions")
    return n_valid
