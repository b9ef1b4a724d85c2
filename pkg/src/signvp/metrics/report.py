"""Evaluation report assembly and serialization."""

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

from .bleu import SETTINGS_ECHO, corpus_bleu
from .rouge import rouge_l


@dataclass
class EvalReport:
    """Corpus scores plus the settings echo identifying how they were computed.

    BLEU values live in [0, 100]; rouge_l in [0, 1]. The bleurt field is
    always None (no pretrained scorer available) but kept so downstream
    tables have a stable column set.
    """

    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    bleu: float
    rouge_l: float
    n_examples: int
    settings: str = SETTINGS_ECHO
    bleurt: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: Path) -> "EvalReport":
        return cls.from_json(Path(path).read_text())


def evaluate_corpus(hyps: Sequence[str], refs: Sequence[str]) -> EvalReport:
    """Score a hypothesis corpus against single references."""
    return EvalReport(
        bleu1=corpus_bleu(hyps, refs, max_n=1),
        bleu2=corpus_bleu(hyps, refs, max_n=2),
        bleu3=corpus_bleu(hyps, refs, max_n=3),
        bleu4=corpus_bleu(hyps, refs, max_n=4),
        bleu=corpus_bleu(hyps, refs, max_n=4),
        rouge_l=rouge_l(hyps, refs),
        n_examples=len(list(hyps)),
    )
