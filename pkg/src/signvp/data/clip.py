"""Video clip model and raw on-disk tensor format.

Clips are stored as a fixed little-endian header followed by float32
frame data in [T, H, W, C] order:

    bytes 0..7    magic "SVPCLIP1"
    u32           format version (1)
    u32 x 4       T, H, W, C
    f64           frames per second
    u32           valid_length
    f32 x T*H*W*C frame data, C-fastest

An optional PNG frame-sequence export is provided for inspection.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"SVPCLIP1"
_HEADER = struct.Struct("<8sIIIIIdI")
FORMAT_VERSION = 1


@dataclass
class VideoClip:
    """A frame tensor plus frame rate, validity marker, and optional caption."""

    frames: np.ndarray  # [T, H, W, C] float32 in [0, 1]
    fps: float
    valid_length: int
    caption: Optional[str] = None
    clip_id: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.frames.ndim != 4:
            raise ValueError(f"frames must be [T, H, W, C], got shape {self.frames.shape}")
        t = self.frames.shape[0]
        if self.frames.shape[3] != 3:
            raise ValueError(f"expected 3 channels, got {self.frames.shape[3]}")
        if not (1 <= self.valid_length <= t):
            raise ValueError(f"valid_length {self.valid_length} outside [1, {t}]")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        lo = float(self.frames.min())
        hi = float(self.frames.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"pixel values outside [0, 1]: min {lo}, max {hi}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.frames.shape)


@dataclass
class RegionBox:
    """A pixel box applied over an inclusive frame range."""

    frame_range: tuple[int, int]  # [first, last] inclusive
    box: tuple[int, int, int, int]  # (x0, y0, x1, y1), exclusive upper edges

    def validate(self, num_frames: int, height: int, width: int) -> None:
        first, last = self.frame_range
        x0, y0, x1, y1 = self.box
        if not (0 <= first <= last < num_frames):
            raise ValueError(f"frame range {self.frame_range} outside clip of {num_frames} frames")
        if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
            raise ValueError(f"box {self.box} outside {width}x{height} frame")


def write_clip(path: Path, clip: VideoClip) -> None:
    frames = np.ascontiguousarray(clip.frames, dtype="<f4")
    t, h, w, c = frames.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, t, h, w, c, clip.fps, clip.valid_length)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frames.tobytes())


def read_clip(path: Path, caption: Optional[str] = None, clip_id: Optional[str] = None) -> VideoClip:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, t, h, w, c, fps, valid_length = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(t * h * w * c * 4), dtype="<f4")
    if data.size != t * h * w * c:
        raise ValueError(f"{path}: truncated frame data")
    frames = data.reshape(t, h, w, c).copy()
    return VideoClip(
        frames=frames,
        fps=fps,
        valid_length=valid_length,
        caption=caption,
        clip_id=clip_id if clip_id is not None else path.stem,
    )


def export_image_sequence(clip: VideoClip, out_dir: Path) -> list[Path]:
    """Write one lossless PNG per frame for visual inspection."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(clip.frames):
        img = Image.fromarray((frame * 255.0 + 0.5).astype(np.uint8))
        path = out_dir / f"frame_{i:05d}.png"
        img.save(path)
        paths.append(path)
    return paths
