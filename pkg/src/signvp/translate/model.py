"""Feature-conditioned encoder-decoder transformer for sign-to-text translation."""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..nn import CrossAttentionBlock, SelfAttentionBlock
from .tokenizer import PAD_ID


@dataclass(frozen=True)
class TranslationConfig:
    feature_dim: int = 192  # D of the incoming features
    enc_layers: int = 6
    dec_layers: int = 3
    heads: int = 4
    embed_dim: int = 256
    ffn_dim: int = 1024
    dropout: float = 0.3
    label_smoothing: float = 0.2
    vocab_size: int = 7000
    lowercase: bool = True
    activation: str = "relu"
    max_source_len: int = 1024
    max_target_len: int = 128
    scale_embeddings: bool = True
    layernorm_embedding: bool = True

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if self.vocab_size < 4:
            raise ValueError("vocab must hold at least pad/bos/eos/unk")


def label_smoothed_ce(
    logits: torch.Tensor,
    targets: torch.Tensor,
    smoothing: float = 0.2,
    pad_id: int = PAD_ID,
) -> torch.Tensor:
    """Mean over non-pad positions of (1-eps) * nll + eps * mean_k(-log p_k)."""
    logp = F.log_softmax(logits, dim=-1)
    nll = -logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    smooth = -logp.mean(dim=-1)
    per_pos = (1.0 - smoothing) * nll + smoothing * smooth
    keep = targets != pad_id
    if not bool(keep.any()):
        raise ValueError("all target positions are padding")
    return per_pos[keep].mean()


class TranslationModel(nn.Module):
    """Projected feature sequence in, subword logits out; shared target embeddings."""

    def __init__(self, cfg: TranslationConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        mlp_ratio = cfg.ffn_dim / d
        self.feature_proj = nn.Linear(cfg.feature_dim, d)
        self.src_pos = nn.Embedding(cfg.max_source_len, d)
        self.src_norm = nn.LayerNorm(d) if cfg.layernorm_embedding else nn.Identity()
        self.encoder = nn.ModuleList(
            SelfAttentionBlock(d, cfg.heads, mlp_ratio, cfg.dropout, activation=cfg.activation)
            for _ in range(cfg.enc_layers)
        )
        self.encoder_norm = nn.LayerNorm(d)

        self.embed = nn.Embedding(cfg.vocab_size, d, padding_idx=PAD_ID)
        self.tgt_pos = nn.Embedding(cfg.max_target_len + 1, d)
        self.tgt_norm = nn.LayerNorm(d) if cfg.layernorm_embedding else nn.Identity()
        self.decoder = nn.ModuleList(
            CrossAttentionBlock(d, cfg.heads, mlp_ratio, cfg.dropout, activation=cfg.activation)
            for _ in range(cfg.dec_layers)
        )
        self.decoder_norm = nn.LayerNorm(d)
        self.dropout = nn.Dropout(cfg.dropout)
        self.embed_scale = math.sqrt(d) if cfg.scale_embeddings else 1.0

        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.xavier_uniform_(module.weight)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
            elif isinstance(module, nn.Embedding):
                nn.init.normal_(module.weight, std=0.02)

    def encode(
        self, features: torch.Tensor, src_valid: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        """features: [B, S, D]; sequences beyond max_source_len are truncated."""
        if features.shape[1] > self.cfg.max_source_len:
            features = features[:, : self.cfg.max_source_len]
            if src_valid is not None:
                src_valid = src_valid[:, : self.cfg.max_source_len]
        x = self.feature_proj(features)
        positions = torch.arange(x.shape[1], device=x.device)
        x = x + self.src_pos(positions)[None]
        x = self.dropout(self.src_norm(x))
        for block in self.encoder:
            x = block(x, key_valid=src_valid)
        return self.encoder_norm(x), src_valid

    def decode(
        self,
        memory: torch.Tensor,
        target_in: torch.Tensor,
        memory_valid: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """target_in: [B, L] token ids starting with BOS; returns [B, L, V] logits."""
        if target_in.shape[1] > self.cfg.max_target_len + 1:
            raise ValueError(f"target length {target_in.shape[1]} exceeds maximum")
        y = self.embed(target_in) * self.embed_scale
        positions = torch.arange(y.shape[1], device=y.device)
        y = y + self.tgt_pos(positions)[None]
        y = self.dropout(self.tgt_norm(y))
        for block in self.decoder:
            y = block(y, memory, memory_valid=memory_valid)
        y = self.decoder_norm(y)
        return y @ self.embed.weight.t()

    def forward(
        self,
        features: torch.Tensor,
        target_in: torch.Tensor,
        src_valid: torch.Tensor | None = None,
    ) -> torch.Tensor:
        memory, memory_valid = self.encode(features, src_valid)
        return self.decode(memory, target_in, memory_valid)
