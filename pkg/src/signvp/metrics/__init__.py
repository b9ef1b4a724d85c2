from .bleu import SETTINGS_ECHO, corpus_bleu, tokenize_13a
from .report import EvalReport, evaluate_corpus
from .rouge import lcs_length, rouge_l

__all__ = [
    "SETTINGS_ECHO",
    "EvalReport",
    "corpus_bleu",
    "evaluate_corpus",
    "lcs_length",
    "rouge_l",
    "tokenize_13a",
]
