"""Greedy and beam-search decoding with raw log-probability ranking.

Hypotheses finish on EOS and are retained without limit; the beam width
bounds live hypotheses only. The returned hypothesis maximizes raw
(unnormalized) log-probability; ties break toward shorter length, then
lexicographic token order. Expansion can stop early once the best live
score cannot beat the best finished score, which is exact because token
log-probabilities are nonpositive.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .model import TranslationModel
from .tokenizer import BOS_ID, EOS_ID


@dataclass
class BeamHypothesis:
    tokens: list[int]  # without BOS; includes EOS when finished
    log_prob: float
    finished: bool


def _rank_key(hyp: BeamHypothesis):
    return (-hyp.log_prob, len(hyp.tokens), hyp.tokens)


def greedy_decode(
    model: TranslationModel,
    features: torch.Tensor,
    max_len: int = 128,
    src_valid: torch.Tensor | None = None,
) -> BeamHypothesis:
    """Token-by-token argmax decoding of a single feature sequence [S, D]."""
    model_was_training = model.training
    model.eval()
    max_len = min(max_len, model.cfg.max_target_len)
    try:
        with torch.no_grad():
            memory, memory_valid = model.encode(features.unsqueeze(0), src_valid)
            tokens: list[int] = []
            log_prob = 0.0
            for _ in range(max_len):
                target_in = torch.tensor([[BOS_ID] + tokens], device=features.device)
                logits = model.decode(memory, target_in, memory_valid)
                logp = F.log_softmax(logits[0, -1], dim=-1)
                token = int(torch.argmax(logp))
                log_prob += float(logp[token])
                tokens.append(token)
                if token == EOS_ID:
                    return BeamHypothesis(tokens, log_prob, finished=True)
            return BeamHypothesis(tokens, log_prob, finished=False)
    finally:
        model.train(model_was_training)


def beam_search(
    model: TranslationModel,
    features: torch.Tensor,
    beams: int = 5,
    max_len: int = 128,
    src_valid: torch.Tensor | None = None,
) -> BeamHypothesis:
    """Beam search over a single feature sequence [S, D]; no length penalty."""
    if beams < 1:
        raise ValueError(f"beams must be >= 1, got {beams}")
    model_was_training = model.training
    model.eval()
    max_len = min(max_len, model.cfg.max_target_len)
    try:
        with torch.no_grad():
            memory, memory_valid = model.encode(features.unsqueeze(0), src_valid)
            live: list[BeamHypothesis] = [BeamHypothesis([], 0.0, finished=False)]
            finished: list[BeamHypothesis] = []
            for _ in range(max_len):
                if not live:
                    break
                if finished:
                    best_finished = max(h.log_prob for h in finished)
                    if max(h.log_prob for h in live) <= best_finished:
                        break  # extensions only lower raw log-probability
                target_in = torch.tensor(
                    [[BOS_ID] + h.tokens for h in live], device=features.device
                )
                logits = model.decode(
                    memory.expand(len(live), -1, -1),
                    target_in,
                    None if memory_valid is None else memory_valid.expand(len(live), -1),
                )
                logp = F.log_softmax(logits[:, -1], dim=-1)  # [n_live, V]
                scores = torch.tensor([h.log_prob for h in live]).unsqueeze(1) + logp
                flat = scores.view(-1)
                k = min(beams, flat.numel())
                top = torch.topk(flat, k)
                vocab = logp.shape[-1]
                next_live: list[BeamHypothesis] = []
                for score, flat_idx in zip(top.values.tolist(), top.indices.tolist()):
                    hyp_idx, token = divmod(flat_idx, vocab)
                    candidate = BeamHypothesis(
                        live[hyp_idx].tokens + [token], score, finished=token == EOS_ID
                    )
                    if candidate.finished:
                        finished.append(candidate)
                    else:
                        next_live.append(candidate)
                live = next_live
            pool = finished if finished else live
            return min(pool, key=_rank_key)
    finally:
        model.train(model_was_training)
