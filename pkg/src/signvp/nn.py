"""Shared transformer building blocks operating on [B, N, C] sequences."""

import torch
import torch.nn.functional as F
from torch import nn


def attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    heads: int,
    key_valid: torch.Tensor | None = None,
    causal: bool = False,
) -> torch.Tensor:
    """Multi-head attention over [B, N, C] projections.

    key_valid: optional [B, Nk] bool; invalid keys receive -inf logits. Rows
    with no valid key fall back to unmasked attention so outputs stay finite.
    """
    b, n_q, c = q.shape
    head_dim = c // heads
    q = q.view(b, n_q, heads, head_dim).transpose(1, 2)
    k = k.view(b, -1, heads, head_dim).transpose(1, 2)
    v = v.view(b, -1, heads, head_dim).transpose(1, 2)
    bias = None
    if key_valid is not None:
        any_valid = key_valid.any(dim=-1, keepdim=True)
        effective = key_valid | ~any_valid
        bias = torch.zeros(key_valid.shape, dtype=q.dtype, device=q.device)
        bias.masked_fill_(~effective, float("-inf"))
        bias = bias[:, None, None, :]
    if causal:
        n_k = k.shape[2]
        causal_mask = torch.ones(n_q, n_k, dtype=torch.bool, device=q.device).tril()
        causal_bias = torch.zeros(n_q, n_k, dtype=q.dtype, device=q.device)
        causal_bias.masked_fill_(~causal_mask, float("-inf"))
        bias = causal_bias if bias is None else bias + causal_bias
    out = F.scaled_dot_product_attention(q, k, v, attn_mask=bias)
    return out.transpose(1, 2).reshape(b, n_q, c)


class SelfAttentionBlock(nn.Module):
    """Pre-norm self-attention + MLP residual block."""

    def __init__(
        self,
        dim: int,
        heads: int,
        mlp_ratio: float = 4.0,
        dropout: float = 0.0,
        causal: bool = False,
        activation: str = "gelu",
    ):
        super().__init__()
        self.heads = heads
        self.causal = causal
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        act = nn.GELU() if activation == "gelu" else nn.ReLU()
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), act, nn.Linear(hidden, dim))
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, key_valid: torch.Tensor | None = None) -> torch.Tensor:
        q, k, v = self.qkv(self.norm1(x)).chunk(3, dim=-1)
        attn = attention(q, k, v, self.heads, key_valid=key_valid, causal=self.causal)
        x = x + self.dropout(self.proj(attn))
        return x + self.dropout(self.mlp(self.norm2(x)))


class CrossAttentionBlock(nn.Module):
    """Pre-norm causal self-attention, cross-attention, and MLP; decoder-style."""

    def __init__(
        self,
        dim: int,
        heads: int,
        mlp_ratio: float = 4.0,
        dropout: float = 0.0,
        activation: str = "relu",
    ):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(dim)
        self.self_qkv = nn.Linear(dim, 3 * dim)
        self.self_proj = nn.Linear(dim, dim)
        self.norm_cross = nn.LayerNorm(dim)
        self.cross_q = nn.Linear(dim, dim)
        self.cross_kv = nn.Linear(dim, 2 * dim)
        self.cross_proj = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        act = nn.ReLU() if activation == "relu" else nn.GELU()
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), act, nn.Linear(hidden, dim))
        self.dropout = nn.Dropout(dropout)

    def forward(
        self,
        x: torch.Tensor,
        memory: torch.Tensor,
        memory_valid: torch.Tensor | None = None,
    ) -> torch.Tensor:
        q, k, v = self.self_qkv(self.norm1(x)).chunk(3, dim=-1)
        x = x + self.dropout(self.self_proj(attention(q, k, v, self.heads, causal=True)))
        mk, mv = self.cross_kv(memory).chunk(2, dim=-1)
        cq = self.cross_q(self.norm_cross(x))
        x = x + self.dropout(
            self.cross_proj(attention(cq, mk, mv, self.heads, key_valid=memory_valid))
        )
        return x + self.dropout(self.mlp(self.norm2(x)))
