from .augment import AugmentConfig, RandAugConfig, augment, hflip
from .blur import blur_regions
from .clip import RegionBox, VideoClip, export_image_sequence, read_clip, write_clip
from .manifest import SPLITS, DatasetManifest, ManifestRecord, make_splits
from .sampling import temporal_sample
from .subtitles import (
    ClipSegment,
    SegmentationResult,
    SubtitleEntry,
    format_srt,
    parse_srt,
    segment_by_subtitles,
)
from .toy import ToySignSpec, face_templates, generate_toy_dataset, glyph_templates, render_clip

__all__ = [
    "SPLITS",
    "AugmentConfig",
    "ClipSegment",
    "DatasetManifest",
    "ManifestRecord",
    "RandAugConfig",
    "RegionBox",
    "SegmentationResult",
    "SubtitleEntry",
    "ToySignSpec",
    "VideoClip",
    "augment",
    "blur_regions",
    "export_image_sequence",
    "face_templates",
    "format_srt",
    "generate_toy_dataset",
    "glyph_templates",
    "hflip",
    "make_splits",
    "parse_srt",
    "read_clip",
    "render_clip",
    "segment_by_subtitles",
    "temporal_sample",
    "write_clip",
]
