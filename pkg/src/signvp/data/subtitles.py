"""SRT subtitle parsing and caption-driven clip segmentation."""

import re
from dataclasses import dataclass

_TIMESTAMP = re.compile(r"(\d{2,}):(\d{2}):(\d{2}),(\d{3})")
_ARROW_LINE = re.compile(
    r"(\d{2,}:\d{2}:\d{2},\d{3})\s*-->\s*(\d{2,}:\d{2}:\d{2},\d{3})"
)


@dataclass(frozen=True)
class SubtitleEntry:
    start_s: float
    end_s: float
    text: str

    def validate(self) -> None:
        if not (0 <= self.start_s < self.end_s):
            raise ValueError(f"bad subtitle timing [{self.start_s}, {self.end_s}]")
        if not self.text.strip():
            raise ValueError("subtitle text empty after trim")


@dataclass(frozen=True)
class ClipSegment:
    start_frame: int
    end_frame: int  # exclusive
    caption: str


@dataclass
class SegmentationResult:
    segments: list[ClipSegment]
    skipped: int  # entries entirely beyond the video end


def _parse_timestamp(text: str) -> float:
    m = _TIMESTAMP.fullmatch(text.strip())
    if m is None:
        raise ValueError(f"bad SRT timestamp {text!r}")
    hours, minutes, seconds, millis = (int(g) for g in m.groups())
    return hours * 3600.0 + minutes * 60.0 + seconds + millis / 1000.0


def format_timestamp(seconds: float) -> str:
    millis = round(seconds * 1000)
    h, rem = divmod(millis, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def parse_srt(text: str) -> list[SubtitleEntry]:
    """Parse SubRip text into subtitle entries, in file order."""
    entries = []
    for block in re.split(r"\n\s*\n", text.strip()):
        lines = [line.rstrip("\r") for line in block.splitlines() if line.strip()]
        if not lines:
            continue
        arrow_idx = next((i for i, line in enumerate(lines) if _ARROW_LINE.search(line)), None)
        if arrow_idx is None:
            raise ValueError(f"SRT block without timing line: {block!r}")
        m = _ARROW_LINE.search(lines[arrow_idx])
        caption = " ".join(lines[arrow_idx + 1 :]).strip()
        entry = SubtitleEntry(
            start_s=_parse_timestamp(m.group(1)),
            end_s=_parse_timestamp(m.group(2)),
            text=caption,
        )
        entry.validate()
        entries.append(entry)
    return entries


def format_srt(entries: list[SubtitleEntry]) -> str:
    blocks = []
    for i, entry in enumerate(entries, start=1):
        blocks.append(
            f"{i}\n{format_timestamp(entry.start_s)} --> {format_timestamp(entry.end_s)}\n{entry.text}"
        )
    return "\n\n".join(blocks) + "\n"


def segment_by_subtitles(
    entries: list[SubtitleEntry], fps: float, total_frames: int
) -> SegmentationResult:
    """Map each subtitle entry to a frame range [floor(start*fps), ceil(end*fps)).

    End frames are clamped to the video length. Entries starting at or past
    the end are counted as skipped rather than failing; overlapping entries
    yield overlapping segments, one segment per entry.
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if total_frames < 1:
        raise ValueError(f"total_frames must be >= 1, got {total_frames}")
    import math

    segments = []
    skipped = 0
    for entry in entries:
        entry.validate()
        start = math.floor(entry.start_s * fps)
        end = min(math.ceil(entry.end_s * fps), total_frames)
        if start >= total_frames:
            skipped += 1
            continue
        if end - start <= 0:
            continue
        segments.append(ClipSegment(start_frame=start, end_frame=end, caption=entry.text))
    return SegmentationResult(segments=segments, skipped=skipped)
