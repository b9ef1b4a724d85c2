"""Corpus BLEU with 13a tokenization, exponential smoothing, and brevity penalty."""

import math
import re
from collections import Counter
from typing import Iterable, Sequence

MAX_NGRAM_ORDER = 4

SETTINGS_ECHO = "nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp"

_ENTITY_SUBS = (
    ("<skipped>", ""),
    ("-\n", ""),
    ("\n", " "),
    ("&quot;", '"'),
    ("&amp;", "&"),
    ("&lt;", "<"),
    ("&gt;", ">"),
)

_PUNCT_PAD = re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])")
_PERIOD_COMMA_BEFORE = re.compile(r"([^0-9])([\.,])")
_PERIOD_COMMA_AFTER = re.compile(r"([\.,])([^0-9])")
_DIGIT_DASH = re.compile(r"([0-9])(-)")
_WHITESPACE = re.compile(r"\s+")


def tokenize_13a(text: str) -> list[str]:
    """Split a segment into tokens with the mteval-13a scheme, case preserved."""
    norm = text
    for old, new in _ENTITY_SUBS:
        norm = norm.replace(old, new)
    norm = f" {norm} "
    norm = _PUNCT_PAD.sub(r" \1 ", norm)
    norm = _PERIOD_COMMA_BEFORE.sub(r"\1 \2 ", norm)
    norm = _PERIOD_COMMA_AFTER.sub(r" \1 \2", norm)
    norm = _DIGIT_DASH.sub(r"\1 \2 ", norm)
    norm = _WHITESPACE.sub(" ", norm).strip()
    if not norm:
        return []
    return norm.split(" ")


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(
    hyps: Iterable[str],
    refs: Iterable[str],
    max_n: int = MAX_NGRAM_ORDER,
    smoothing: str = "exp",
) -> float:
    """Corpus-level BLEU in [0, 100] over paired hypothesis/reference strings.

    Modified n-gram precisions are pooled over the whole corpus. With
    exponential smoothing the k-th consecutive zero-match order n receives
    p_n = 1 / (2^k * total_n). Orders with no n-grams anywhere in the
    hypothesis corpus are vacuous and excluded from the geometric mean, so
    identical corpora always score 100. The brevity penalty is
    exp(1 - ref_len / hyp_len) when the hypothesis corpus is shorter.
    """
    hyps = list(hyps)
    refs = list(refs)
    if len(hyps) != len(refs):
        raise ValueError(f"hypothesis/reference count mismatch: {len(hyps)} vs {len(refs)}")
    if not hyps:
        raise ValueError("empty corpus")
    if smoothing not in ("exp", "none"):
        raise ValueError(f"unknown smoothing method {smoothing!r}")

    correct = [0] * max_n
    total = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        if not ref.strip():
            raise ValueError("empty reference string")
        hyp_tokens = tokenize_13a(hyp)
        ref_tokens = tokenize_13a(ref)
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, max_n + 1):
            hyp_ngrams = _ngram_counts(hyp_tokens, n)
            ref_ngrams = _ngram_counts(ref_tokens, n)
            total[n - 1] += max(len(hyp_tokens) - n + 1, 0)
            correct[n - 1] += sum(min(count, ref_ngrams[g]) for g, count in hyp_ngrams.items())

    log_precisions = []
    smooth_factor = 1.0
    for n in range(1, max_n + 1):
        if total[n - 1] == 0:
            continue  # vacuous order: no n-grams of this length exist
        if correct[n - 1] == 0:
            if smoothing == "exp":
                smooth_factor *= 2.0
                precision = 1.0 / (smooth_factor * total[n - 1])
            else:
                return 0.0
        else:
            precision = correct[n - 1] / total[n - 1]
        log_precisions.append(math.log(precision))

    if not log_precisions:
        return 0.0

    if hyp_len == 0:
        return 0.0
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(sum(log_precisions) / len(log_precisions))
