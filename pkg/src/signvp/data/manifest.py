"""Dataset manifest: one JSON record per line, a metadata header line first."""

import datetime
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class ManifestRecord:
    clip_id: str
    path: str
    caption: Optional[str]
    split: str
    date: Optional[datetime.date] = None
    face_box: Optional[tuple[int, int, int, int]] = None

    def to_json(self) -> str:
        payload = {
            "clip_id": self.clip_id,
            "path": self.path,
            "caption": self.caption,
            "split": self.split,
            "date": self.date.isoformat() if self.date else None,
        }
        if self.face_box is not None:
            payload["face_box"] = list(self.face_box)
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ManifestRecord":
        payload = json.loads(text)
        face_box = payload.get("face_box")
        return cls(
            clip_id=payload["clip_id"],
            path=payload["path"],
            caption=payload.get("caption"),
            split=payload["split"],
            date=datetime.date.fromisoformat(payload["date"]) if payload.get("date") else None,
            face_box=tuple(face_box) if face_box else None,
        )


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        ids = [r.clip_id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate clip ids: {dupes[:5]}")
        for record in self.records:
            if record.split not in SPLITS:
                raise ValueError(f"record {record.clip_id}: unknown split {record.split!r}")

    def subset(self, split: str) -> list[ManifestRecord]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [r for r in self.records if r.split == split]

    def save(self, path: Path) -> None:
        lines = [json.dumps({"manifest_meta": self.metadata}, sort_keys=True)]
        lines.extend(record.to_json() for record in self.records)
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: Path) -> "DatasetManifest":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise ValueError(f"{path}: empty manifest")
        head = json.loads(lines[0])
        if "manifest_meta" not in head:
            raise ValueError(f"{path}: first line must hold manifest_meta")
        records = [ManifestRecord.from_json(line) for line in lines[1:] if line.strip()]
        return cls(records=records, metadata=head["manifest_meta"])


def make_splits(
    manifest: DatasetManifest,
    fractions: tuple[float, float, float] = (0.85, 0.06, 0.09),
    eval_cutoff_date: Optional[datetime.date] = None,
    seed: int = 0,
) -> DatasetManifest:
    """Assign train/validation/test splits.

    Validation and test sizes are round(fraction * N) with the remainder in
    train. When a cutoff date is given, evaluation records are drawn only
    from records dated at or after it.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    records = manifest.records
    n = len(records)
    if n < 3:
        raise ValueError(f"need at least 3 records to split, got {n}")
    n_val = round(fractions[1] * n)
    n_test = round(fractions[2] * n)

    if eval_cutoff_date is None:
        eligible = list(range(n))
    else:
        eligible = [
            i for i, r in enumerate(records) if r.date is not None and r.date >= eval_cutoff_date
        ]
    if len(eligible) < n_val + n_test:
        raise ValueError(
            f"only {len(eligible)} records at or after the cutoff; "
            f"need {n_val + n_test} for validation+test (short by {n_val + n_test - len(eligible)})"
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(eligible))
    val_ids = {records[eligible[i]].clip_id for i in order[:n_val]}
    test_ids = {records[eligible[i]].clip_id for i in order[n_val : n_val + n_test]}

    new_records = []
    for record in records:
        if record.clip_id in val_ids:
            split = "validation"
        elif record.clip_id in test_ids:
            split = "test"
        else:
            split = "train"
        new_records.append(replace(record, split=split))
    return DatasetManifest(records=new_records, metadata=dict(manifest.metadata))
