"""Procedural toy sign language: moving body glyphs plus a face-region marker.

Each vocabulary entry renders as a distinct body glyph bouncing through the
lower canvas while a per-entry marker is shown in a fixed "face" box at the
top. One pair of entries shares its body glyph and differs only in the face
marker, so a configurable fraction of the vocabulary is disambiguated by
the face region alone; blurring that box destroys exactly that signal.

Generation is a pure function of (spec, n_clips): the same seed reproduces
identical captions, pixels, and manifests.
"""

import datetime
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clip import RegionBox, VideoClip, write_clip
from .manifest import DatasetManifest, ManifestRecord, make_splits

# NATO-style token names; capitalized entries exercise truecasing
DEFAULT_TOKEN_NAMES = (
    "alfa", "bravo", "Charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "India", "Juliett", "kilo", "Lima", "Mike", "november", "Oscar", "papa",
    "Quebec", "Romeo", "sierra", "tango",
)

_GLYPH_STREAM = 101
_FACE_STREAM = 102
_CLIP_STREAM = 103

_BASE_DATE = datetime.date(2021, 1, 1)
_DATE_SPAN_DAYS = 730


@dataclass(frozen=True)
class ToySignSpec:
    vocab_size: int = 20
    sentence_length_range: tuple[int, int] = (1, 8)
    frames_per_token: int = 4
    canvas: tuple[int, int] = (32, 32)
    trajectory: str = "bounce"
    seed: int = 0
    fps: float = 25.0
    ambiguous_fraction: float = 0.1  # share of vocab resolved only by the face box

    def validate(self) -> None:
        if self.vocab_size < 2:
            raise ValueError(f"vocab_size must be >= 2, got {self.vocab_size}")
        lo, hi = self.sentence_length_range
        if lo < 1:
            raise ValueError("empty sentences disallowed")
        if hi < lo:
            raise ValueError(f"bad sentence_length_range {self.sentence_length_range}")
        if self.frames_per_token < 2:
            raise ValueError(f"frames_per_token must be >= 2, got {self.frames_per_token}")
        if self.trajectory != "bounce":
            raise ValueError(f"unknown trajectory family {self.trajectory!r}")
        h, w = self.canvas
        if h < 24 or w < 24:
            raise ValueError(f"canvas too small: {self.canvas}")

    @property
    def glyph_size(self) -> int:
        return max(8, self.canvas[0] // 3)

    @property
    def face_marker_size(self) -> int:
        return max(4, self.canvas[0] // 4 - 2)

    def face_box(self) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) of the face region, fixed across all clips."""
        h, w = self.canvas
        return (w // 4, 0, w - w // 4, h // 4)

    def token_names(self) -> list[str]:
        names = list(DEFAULT_TOKEN_NAMES[: self.vocab_size])
        for i in range(len(names), self.vocab_size):
            names.append(f"sign{i}")
        return names

    def n_ambiguous(self) -> int:
        # entries 0..n-1 share one body glyph; face markers stay distinct
        n = int(round(self.ambiguous_fraction * self.vocab_size))
        return n if n >= 2 else 0

    def body_id(self, token: int) -> int:
        return 0 if token < self.n_ambiguous() else token


def _bitmap(seed_parts: list[int], size: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed_parts))
    return (rng.random((size, size)) < 0.5).astype(np.float32)


def glyph_templates(spec: ToySignSpec) -> np.ndarray:
    """Rendered body patches per vocab entry, [vocab, g, g]; shared for the ambiguous pair."""
    g = spec.glyph_size
    out = np.stack(
        [_bitmap([spec.seed, _GLYPH_STREAM, spec.body_id(v)], g) for v in range(spec.vocab_size)]
    )
    return 0.1 + 0.85 * out


def face_templates(spec: ToySignSpec) -> np.ndarray:
    """Rendered face-marker patches per vocab entry, [vocab, m, m]; all distinct."""
    m = spec.face_marker_size
    out = np.stack([_bitmap([spec.seed, _FACE_STREAM, v], m) for v in range(spec.vocab_size)])
    return 0.1 + 0.85 * out


def _background(spec: ToySignSpec, rng: np.random.Generator) -> np.ndarray:
    h, w = spec.canvas
    fy = float(rng.integers(1, 3))
    fx = float(rng.integers(1, 3))
    py, px = rng.uniform(0, 2 * np.pi, size=2)
    yy = np.arange(h)[:, None]
    xx = np.arange(w)[None, :]
    pattern = np.sin(2 * np.pi * fy * yy / h + py) * np.sin(2 * np.pi * fx * xx / w + px)
    return (0.35 + 0.1 * pattern).astype(np.float32)


def render_clip(
    spec: ToySignSpec, clip_index: int
) -> tuple[VideoClip, str, RegionBox]:
    """Render one clip; returns (clip, caption, face region box)."""
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _CLIP_STREAM, clip_index]))
    h, w = spec.canvas
    lo, hi = spec.sentence_length_range
    length = int(rng.integers(lo, hi + 1))
    tokens = rng.integers(0, spec.vocab_size, size=length)

    glyphs = glyph_templates(spec)
    faces = face_templates(spec)
    g = spec.glyph_size
    m = spec.face_marker_size
    fx0, fy0, fx1, fy1 = spec.face_box()
    face_top = fy0 + (fy1 - fy0 - m) // 2
    face_left = fx0 + (fx1 - fx0 - m) // 2

    body_top = fy1  # glyphs move below the face strip
    y_max = h - g
    x_max = w - g
    if y_max < body_top or x_max < 0:
        raise ValueError(f"canvas {spec.canvas} cannot fit glyph of size {g}")

    background = _background(spec, rng)
    total = length * spec.frames_per_token
    frames = np.repeat(background[None, :, :], total, axis=0)

    frame = 0
    for token in tokens:
        token = int(token)
        pos_y = rng.uniform(body_top, y_max)
        pos_x = rng.uniform(0, x_max)
        angle = rng.uniform(0, 2 * np.pi)
        speed = rng.uniform(1.0, 2.0)
        vel_y = speed * np.sin(angle)
        vel_x = speed * np.cos(angle)
        for _ in range(spec.frames_per_token):
            iy = int(round(pos_y))
            ix = int(round(pos_x))
            frames[frame, iy : iy + g, ix : ix + g] = glyphs[token]
            frames[frame, face_top : face_top + m, face_left : face_left + m] = faces[token]
            frame += 1
            pos_y += vel_y
            pos_x += vel_x
            if pos_y < body_top or pos_y > y_max:
                vel_y = -vel_y
                pos_y = float(np.clip(pos_y, body_top, y_max))
            if pos_x < 0 or pos_x > x_max:
                vel_x = -vel_x
                pos_x = float(np.clip(pos_x, 0, x_max))

    names = spec.token_names()
    caption = " ".join(names[t] for t in tokens)
    video = VideoClip(
        frames=np.repeat(frames[..., None], 3, axis=-1).astype(np.float32),
        fps=spec.fps,
        valid_length=total,
        caption=caption,
        clip_id=f"toy-{clip_index:05d}",
    )
    region = RegionBox(frame_range=(0, total - 1), box=spec.face_box())
    return video, caption, region


def generate_toy_dataset(
    spec: ToySignSpec,
    n_clips: int,
    out_dir: Path,
    fractions: tuple[float, float, float] = (0.85, 0.06, 0.09),
) -> DatasetManifest:
    """Render n_clips clips under out_dir/clips and return a split manifest.

    Record paths are relative to out_dir so the manifest bytes are
    independent of where the dataset lives.
    """
    spec.validate()
    if n_clips < 1:
        raise ValueError(f"n_clips must be >= 1, got {n_clips}")
    out_dir = Path(out_dir)
    clips_dir = out_dir / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for i in range(n_clips):
        clip, caption, region = render_clip(spec, i)
        rel_path = f"clips/{clip.clip_id}.clip"
        write_clip(out_dir / rel_path, clip)
        records.append(
            ManifestRecord(
                clip_id=clip.clip_id,
                path=rel_path,
                caption=caption,
                split="train",
                date=_BASE_DATE + datetime.timedelta(days=i % _DATE_SPAN_DAYS),
                face_box=region.box,
            )
        )

    h, w = spec.canvas
    manifest = DatasetManifest(
        records=records,
        metadata={
            "fps": spec.fps,
            "height": h,
            "width": w,
            "generator_seed": spec.seed,
            "vocab_size": spec.vocab_size,
            "frames_per_token": spec.frames_per_token,
        },
    )
    return make_splits(manifest, fractions=fractions, seed=spec.seed)
