"""Symmetric InfoNCE over paired video/text embeddings."""

import torch
import torch.nn.functional as F


def contrastive_loss(
    video_emb: torch.Tensor, text_emb: torch.Tensor, temperature: float | torch.Tensor = 1.0
) -> torch.Tensor:
    """0.5 * (row-wise + column-wise cross-entropy) with diagonal labels.

    Embeddings are L2-normalized here; logits are pairwise similarities
    divided by the temperature.
    """
    if video_emb.shape[0] == 0:
        raise ValueError("empty batch")
    if video_emb.shape != text_emb.shape:
        raise ValueError(f"embedding shapes differ: {video_emb.shape} vs {text_emb.shape}")
    v = F.normalize(video_emb, dim=-1)
    t = F.normalize(text_emb, dim=-1)
    logits = (v @ t.t()) / temperature
    labels = torch.arange(logits.shape[0], device=logits.device)
    return 0.5 * (F.cross_entropy(logits, labels) + F.cross_entropy(logits.t(), labels))


def retrieval_at_1(video_emb: torch.Tensor, text_emb: torch.Tensor) -> float:
    """Fraction of videos whose nearest text (cosine) is their matched pair."""
    v = F.normalize(video_emb, dim=-1)
    t = F.normalize(text_emb, dim=-1)
    pred = (v @ t.t()).argmax(dim=1)
    labels = torch.arange(v.shape[0], device=v.device)
    return float((pred == labels).float().mean())
