"""ROUGE-L: mean sentence-level LCS F-measure over 13a tokens."""

from typing import Iterable

from .bleu import tokenize_13a


def lcs_length(a: list[str], b: list[str]) -> int:
    """Length of the longest common subsequence via dynamic programming."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hyps: Iterable[str], refs: Iterable[str]) -> float:
    """Mean per-pair LCS F-score in [0, 1]; a pair with no overlap scores 0."""
    hyps = list(hyps)
    refs = list(refs)
    if len(hyps) != len(refs):
        raise ValueError(f"hypothesis/reference count mismatch: {len(hyps)} vs {len(refs)}")
    if not hyps:
        raise ValueError("empty corpus")

    scores = []
    for hyp, ref in zip(hyps, refs):
        if not ref.strip():
            raise ValueError("empty reference string")
        hyp_tokens = tokenize_13a(hyp)
        ref_tokens = tokenize_13a(ref)
        lcs = lcs_length(hyp_tokens, ref_tokens)
        if lcs == 0 or not hyp_tokens:
            scores.append(0.0)
            continue
        precision = lcs / len(hyp_tokens)
        recall = lcs / len(ref_tokens)
        scores.append(2.0 * precision * recall / (precision + recall))
    return sum(scores) / len(scores)
