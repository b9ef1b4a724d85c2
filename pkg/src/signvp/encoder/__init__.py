from .config import EncoderConfig, base_scale_config, tiny_config
from .masking import pad_mask_from_frame_mask, sample_mask, validate_pad_mask
from .model import (
    HierarchicalVideoEncoder,
    MultiScaleFeatures,
    PositionEmbedding,
    interpolate_pos_embed,
    to_units,
    units_to_dense,
)

__all__ = [
    "EncoderConfig",
    "HierarchicalVideoEncoder",
    "MultiScaleFeatures",
    "PositionEmbedding",
    "base_scale_config",
    "interpolate_pos_embed",
    "pad_mask_from_frame_mask",
    "sample_mask",
    "tiny_config",
    "to_units",
    "units_to_dense",
    "validate_pad_mask",
]
