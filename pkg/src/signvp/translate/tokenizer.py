"""Unigram subword tokenizer with byte fallback, plus a truecasing table.

The inventory is trained by EM over segmentation likelihoods followed by
iterative pruning of low-probability multi-character pieces. Single
characters seen in the corpus are never pruned and 256 byte pieces are
always present, so every string is encodable and decode(encode(x))
recovers the normalized input exactly.
"""

import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3

SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")
NUM_BYTE_PIECES = 256
WORD_MARKER = "▁"

_BYTE_PIECES = tuple(f"<0x{i:02X}>" for i in range(NUM_BYTE_PIECES))


class VocabSizeError(ValueError):
    """Requested vocab size exceeds what the corpus can support."""

    def __init__(self, requested: int, achievable: int):
        super().__init__(
            f"vocab size {requested} unachievable for this corpus; maximum is {achievable}"
        )
        self.requested = requested
        self.achievable = achievable


def normalize_text(text: str, lowercase: bool) -> str:
    """NFKC normalization, whitespace collapse, optional lowercasing."""
    text = unicodedata.normalize("NFKC", text)
    text = text.replace(WORD_MARKER, "_")  # reserve the word marker
    text = " ".join(text.split())
    return text.lower() if lowercase else text


@dataclass
class TokenizerModel:
    """Trained subword inventory with deterministic id assignment.

    Ids: specials 0..3, byte pieces 4..259, then learned pieces in
    lexicographic order.
    """

    pieces: dict[str, float]  # piece -> log probability
    lowercase: bool
    truecase_table: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._piece_list = sorted(self.pieces)
        base = len(SPECIAL_TOKENS) + NUM_BYTE_PIECES
        self._piece_to_id = {p: base + i for i, p in enumerate(self._piece_list)}
        self._max_piece_len = max((len(p) for p in self.pieces), default=1)

    @property
    def vocab_size(self) -> int:
        return len(SPECIAL_TOKENS) + NUM_BYTE_PIECES + len(self.pieces)

    def id_to_piece(self, idx: int) -> str:
        if idx < len(SPECIAL_TOKENS):
            return SPECIAL_TOKENS[idx]
        if idx < len(SPECIAL_TOKENS) + NUM_BYTE_PIECES:
            return _BYTE_PIECES[idx - len(SPECIAL_TOKENS)]
        return self._piece_list[idx - len(SPECIAL_TOKENS) - NUM_BYTE_PIECES]

    def _viterbi(self, text: str) -> list[str]:
        # best[i]: (score, piece ending at i); unknown chars cost heavily
        # but remain representable through the byte fallback applied later.
        n = len(text)
        neg_inf = -math.inf
        best = [neg_inf] * (n + 1)
        back: list[Optional[str]] = [None] * (n + 1)
        best[0] = 0.0
        unk_logp = min(self.pieces.values(), default=-10.0) - 10.0
        for i in range(n):
            if best[i] == neg_inf:
                continue
            max_len = min(self._max_piece_len, n - i)
            for length in range(1, max_len + 1):
                cand = text[i : i + length]
                logp = self.pieces.get(cand)
                if logp is None:
                    if length > 1:
                        continue
                    logp = unk_logp  # single char not in inventory
                score = best[i] + logp
                if score > best[i + length]:
                    best[i + length] = score
                    back[i + length] = cand
        out = []
        pos = n
        while pos > 0:
            piece = back[pos]
            assert piece is not None
            out.append(piece)
            pos -= len(piece)
        out.reverse()
        return out

    def encode(self, text: str) -> list[int]:
        """Encode to piece ids; characters outside the inventory fall back to bytes."""
        internal = WORD_MARKER + normalize_text(text, self.lowercase).replace(" ", WORD_MARKER)
        ids = []
        for piece in self._viterbi(internal):
            idx = self._piece_to_id.get(piece)
            if idx is not None:
                ids.append(idx)
            else:
                for byte in piece.encode("utf-8"):
                    ids.append(len(SPECIAL_TOKENS) + byte)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        """Invert encode; special ids are dropped, byte runs are reassembled."""
        chunks: list[str] = []
        byte_buf = bytearray()
        n_special = len(SPECIAL_TOKENS)

        def flush():
            if byte_buf:
                chunks.append(byte_buf.decode("utf-8", errors="replace"))
                byte_buf.clear()

        for idx in ids:
            if idx < n_special:
                continue
            if idx < n_special + NUM_BYTE_PIECES:
                byte_buf.append(idx - n_special)
                continue
            flush()
            chunks.append(self._piece_list[idx - n_special - NUM_BYTE_PIECES])
        flush()
        text = "".join(chunks).replace(WORD_MARKER, " ")
        out = text.strip()
        if self.lowercase and self.truecase_table:
            out = self.truecase(out)
        return out

    def truecase(self, text: str) -> str:
        if not text:
            return text
        return " ".join(self.truecase_table.get(tok, tok) for tok in text.split(" "))

    def save(self, path: Path) -> None:
        payload = {
            "pieces": self.pieces,
            "lowercase": self.lowercase,
            "truecase_table": self.truecase_table,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True))

    @classmethod
    def load(cls, path: Path) -> "TokenizerModel":
        payload = json.loads(Path(path).read_text())
        return cls(
            pieces=payload["pieces"],
            lowercase=payload["lowercase"],
            truecase_table=payload.get("truecase_table", {}),
        )


def _expected_counts(sentences: list[tuple[str, int]], logp: dict[str, float], max_len: int):
    """Forward-backward expected piece counts under the unigram model."""
    counts: Counter = Counter()
    for text, freq in sentences:
        n = len(text)
        fwd = [-math.inf] * (n + 1)
        fwd[0] = 0.0
        for i in range(n):
            if fwd[i] == -math.inf:
                continue
            for length in range(1, min(max_len, n - i) + 1):
                piece = text[i : i + length]
                lp = logp.get(piece)
                if lp is None:
                    continue
                j = i + length
                fwd[j] = _logaddexp(fwd[j], fwd[i] + lp)
        bwd = [-math.inf] * (n + 1)
        bwd[n] = 0.0
        for i in range(n - 1, -1, -1):
            for length in range(1, min(max_len, n - i) + 1):
                piece = text[i : i + length]
                lp = logp.get(piece)
                if lp is None:
                    continue
                bwd[i] = _logaddexp(bwd[i], lp + bwd[i + length])
        total = fwd[n]
        if total == -math.inf:
            continue
        for i in range(n):
            if fwd[i] == -math.inf:
                continue
            for length in range(1, min(max_len, n - i) + 1):
                piece = text[i : i + length]
                lp = logp.get(piece)
                if lp is None:
                    continue
                posterior = fwd[i] + lp + bwd[i + length] - total
                if posterior > -30.0:
                    counts[piece] += freq * math.exp(posterior)
    return counts


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a > b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def build_truecase_table(corpus: Iterable[str]) -> dict[str, str]:
    """Map each lowercased token to its most frequent surface form."""
    forms: dict[str, Counter] = {}
    for line in corpus:
        for tok in normalize_text(line, lowercase=False).split(" "):
            if tok:
                forms.setdefault(tok.lower(), Counter())[tok] += 1
    # ties break lexicographically for determinism
    return {
        low: min((f for f, c in counter.items() if c == max(counter.values())))
        for low, counter in forms.items()
    }


def train_tokenizer(
    corpus: Iterable[str],
    vocab_size: int = 7000,
    lowercase: bool = True,
    clamp: bool = False,
    max_piece_len: int = 8,
    min_count: int = 2,
    em_iterations: int = 3,
    prune_fraction: float = 0.25,
) -> TokenizerModel:
    """Train the unigram inventory on a text corpus.

    Raises VocabSizeError when vocab_size exceeds the achievable inventory
    unless clamp=True, in which case the full achievable inventory is kept.
    """
    lines = [normalize_text(line, lowercase) for line in corpus]
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError("empty corpus")
    truecase_table = build_truecase_table(corpus) if lowercase else {}

    internal = Counter(WORD_MARKER + line.replace(" ", WORD_MARKER) for line in lines)
    sentences = sorted(internal.items())

    # seed inventory: every frequent substring plus all single characters
    substring_counts: Counter = Counter()
    for text, freq in sentences:
        n = len(text)
        for i in range(n):
            for length in range(1, min(max_piece_len, n - i) + 1):
                substring_counts[text[i : i + length]] += freq
    chars = {p for p in substring_counts if len(p) == 1}
    seed = {p for p, c in substring_counts.items() if len(p) > 1 and c >= min_count} | chars

    achievable = len(SPECIAL_TOKENS) + NUM_BYTE_PIECES + len(seed)
    floor = len(SPECIAL_TOKENS) + NUM_BYTE_PIECES + len(chars)
    if vocab_size > achievable:
        if not clamp:
            raise VocabSizeError(vocab_size, achievable)
        vocab_size = achievable
    if vocab_size < floor:
        raise ValueError(
            f"vocab size {vocab_size} below minimum {floor} (specials + bytes + corpus characters)"
        )
    target_pieces = vocab_size - len(SPECIAL_TOKENS) - NUM_BYTE_PIECES

    total = sum(substring_counts[p] for p in seed)
    logp = {p: math.log(substring_counts[p] / total) for p in sorted(seed)}

    while True:
        for _ in range(em_iterations):
            counts = _expected_counts(sentences, logp, max_piece_len)
            norm = sum(counts.values())
            if norm <= 0:
                break
            floor_logp = math.log(0.5 / norm)
            logp = {p: math.log(counts[p] / norm) if counts[p] > 0 else floor_logp for p in logp}
        if len(logp) <= target_pieces:
            break
        # prune the weakest multi-character pieces; chars always survive
        prunable = sorted(
            (p for p in logp if len(p) > 1), key=lambda p: (logp[p], p)
        )
        n_drop = min(
            len(prunable),
            max(1, int(len(prunable) * prune_fraction)),
            len(logp) - target_pieces,
        )
        for p in prunable[:n_drop]:
            del logp[p]

    return TokenizerModel(pieces=logp, lowercase=lowercase, truecase_table=truecase_table)
