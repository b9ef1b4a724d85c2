"""Region-limited Gaussian blurring for anonymization."""

import numpy as np
from scipy.ndimage import gaussian_filter

from .clip import RegionBox

BLUR_TRUNCATE = 4.0  # kernel half-width in standard deviations


def blur_regions(frames: np.ndarray, boxes: list[RegionBox], sigma: float) -> np.ndarray:
    """Gaussian-blur each box on each covered frame; all other pixels unchanged.

    The blur is applied within the box only, with reflective boundary
    handling at the box edges, so nothing outside a box influences the
    result. sigma is in pixels; sigma 0 is the identity.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    t, h, w, _ = frames.shape
    out = frames.copy()
    if sigma == 0 or not boxes:
        return out
    for region in boxes:
        region.validate(t, h, w)
        first, last = region.frame_range
        x0, y0, x1, y1 = region.box
        patch = out[first : last + 1, y0:y1, x0:x1, :].astype(np.float64)
        out[first : last + 1, y0:y1, x0:x1, :] = gaussian_filter(
            patch, sigma=(0, sigma, sigma, 0), mode="reflect", truncate=BLUR_TRUNCATE
        )
    return out
