"""Appendable feature store with O(1) indexed reads.

File layout: 8-byte magic, then records. Each record is a u32 little-endian
header length, a JSON header {clip_id, epoch, S, D, window_offsets}, and
S*D float32 little-endian feature bytes. An in-memory index keyed by
(clip_id, epoch) is built by one scan on open.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .extract import FeatureSequence

MAGIC = b"SVPFEAT1"
_LEN = struct.Struct("<I")


class FeatureStoreError(KeyError):
    pass


def _scan_index(path: Path) -> dict[tuple[str, int], int]:
    index: dict[tuple[str, int], int] = {}
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a feature store")
        while True:
            offset = fh.tell()
            raw = fh.read(_LEN.size)
            if not raw:
                break
            (header_len,) = _LEN.unpack(raw)
            header = json.loads(fh.read(header_len))
            key = (header["clip_id"], header["epoch"])
            if key in index:
                raise ValueError(f"{path}: duplicate key {key}")
            index[key] = offset
            fh.seek(header["S"] * header["D"] * 4, 1)
    return index


class FeatureStoreWriter:
    """Single-writer append interface; rejects duplicate (clip_id, epoch) keys."""

    def __init__(self, path: Path, append: bool = False):
        self.path = Path(path)
        if append and self.path.exists():
            self._index = _scan_index(self.path)
            self._fh = open(self.path, "ab")
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "wb")
            self._fh.write(MAGIC)
            self._index = {}

    def append(self, seq: FeatureSequence, epoch: int = 0) -> None:
        key = (seq.clip_id, epoch)
        if key in self._index:
            raise FeatureStoreError(f"duplicate (clip_id, epoch) key {key}")
        s, d = seq.features.shape
        header = json.dumps(
            {
                "clip_id": seq.clip_id,
                "epoch": epoch,
                "S": s,
                "D": d,
                "window_offsets": list(seq.window_offsets),
            },
            sort_keys=True,
        ).encode()
        self._index[key] = self._fh.tell()
        self._fh.write(_LEN.pack(len(header)))
        self._fh.write(header)
        self._fh.write(np.ascontiguousarray(seq.features, dtype="<f4").tobytes())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "FeatureStoreWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class FeatureStore:
    """Read-side index over a store file."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._index = _scan_index(self.path)
        self._fh = open(self.path, "rb")

    def __contains__(self, clip_id: str) -> bool:
        return any(cid == clip_id for cid, _ in self._index)

    def clip_ids(self) -> list[str]:
        return sorted({cid for cid, _ in self._index})

    def epochs(self, clip_id: str) -> list[int]:
        out = sorted(ep for cid, ep in self._index if cid == clip_id)
        if not out:
            raise FeatureStoreError(f"clip_id {clip_id!r} not found")
        return out

    def read(self, clip_id: str, epoch: int = 0) -> FeatureSequence:
        key = (clip_id, epoch)
        if key not in self._index:
            raise FeatureStoreError(f"(clip_id, epoch) {key} not found")
        self._fh.seek(self._index[key])
        (header_len,) = _LEN.unpack(self._fh.read(_LEN.size))
        header = json.loads(self._fh.read(header_len))
        data = np.frombuffer(
            self._fh.read(header["S"] * header["D"] * 4), dtype="<f4"
        ).reshape(header["S"], header["D"])
        return FeatureSequence(
            features=data.copy(),
            clip_id=header["clip_id"],
            window_offsets=list(header["window_offsets"]),
        )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "FeatureStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
