"""Masked-autoencoder decoder: multi-scale fusion, mask tokens, pixel loss.

Per-stage encoder features are projected to the decoder width, un-pooled
(nearest neighbor) back to the finest token grid inside each mask unit,
and summed. Learned mask tokens fill the dropped units, a lightweight
transformer stack refines the full grid, and a linear head emits one pixel
block per token. The loss is mean squared error against per-token
normalized pixel targets, over masked-and-temporally-valid tokens only.
"""

import math
from dataclasses import dataclass

import torch
from torch import nn

from ..encoder.config import EncoderConfig
from ..encoder.model import (
    HierarchicalVideoEncoder,
    PositionEmbedding,
    _trunc_normal_init,
    to_units,
    units_to_dense,
)
from ..nn import SelfAttentionBlock

NORMALIZE_EPS = 1e-6


@dataclass(frozen=True)
class MAEDecoderConfig:
    blocks: int = 8
    heads: int = 8
    dim: int = 64

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError(f"decoder needs >= 1 block, got {self.blocks}")
        if self.dim % self.heads:
            raise ValueError(f"decoder dim {self.dim} not divisible by heads {self.heads}")


def pixel_targets(frames: torch.Tensor, cfg: EncoderConfig, normalize: bool = True) -> torch.Tensor:
    """Per-token pixel blocks [B, N_tokens, t*s*s*C] in token-grid order.

    With normalize=True each block is standardized by its own mean and
    population variance (eps added to the variance), so constant blocks map
    to zeros and every non-constant block has unit second moment.
    """
    b, t, h, w, c = frames.shape
    st, ss = cfg.patch_stride_t, cfg.patch_stride_s
    t_tok, h_tok, w_tok = cfg.token_grid
    x = frames.view(b, t_tok, st, h_tok, ss, w_tok, ss, c)
    x = x.permute(0, 1, 3, 5, 2, 4, 6, 7).reshape(b, t_tok * h_tok * w_tok, st * ss * ss * c)
    if not normalize:
        return x
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + NORMALIZE_EPS)


def masked_reconstruction_loss(
    pred: torch.Tensor, target: torch.Tensor, select: torch.Tensor
) -> torch.Tensor:
    """MSE over selected tokens only; predictions elsewhere never enter the graph."""
    if not bool(select.any()):
        raise ValueError("MAE loss undefined: no masked token at a valid temporal position")
    return ((pred[select] - target[select]) ** 2).mean()


class MaskedAutoencoder(nn.Module):
    """Encoder plus fusion decoder computing the masked pixel reconstruction loss."""

    def __init__(self, encoder: HierarchicalVideoEncoder, dec_cfg: MAEDecoderConfig):
        super().__init__()
        self.encoder = encoder
        self.dec_cfg = dec_cfg
        cfg = encoder.cfg
        dim = dec_cfg.dim
        self.stage_proj = nn.ModuleList(nn.Linear(d, dim) for d in cfg.stage_dims)
        self.mask_token = nn.Parameter(torch.zeros(dim))
        self.pos_embed = PositionEmbedding(cfg.token_grid, dim, separable=cfg.sep_pos_embed)
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(dim, dec_cfg.heads, mlp_ratio=4.0) for _ in range(dec_cfg.blocks)
        )
        self.norm = nn.LayerNorm(dim)
        pix = cfg.patch_stride_t * cfg.patch_stride_s**2 * cfg.in_channels
        self.head = nn.Linear(dim, pix)
        self.apply(_trunc_normal_init)
        nn.init.trunc_normal_(self.mask_token, std=0.02)

    def _fuse(self, feats) -> torch.Tensor:
        """Project, un-pool, and sum the per-stage maps over the fine unit grid."""
        mt, mh, mw = feats.mask_unit
        fused = None
        for proj, stage in zip(self.stage_proj, feats.stages):
            x = proj(stage)
            rep_h = mh // x.shape[3]
            rep_w = mw // x.shape[4]
            x = x.repeat_interleave(rep_h, dim=3).repeat_interleave(rep_w, dim=4)
            fused = x if fused is None else fused + x
        return fused  # [B, U_kept, mt, mh, mw, dim]

    def forward(
        self,
        frames: torch.Tensor,
        mask: torch.Tensor,
        pad_valid: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (loss, reconstruction).

        The reconstruction is a full [B, T, H, W, C] pixel tensor where
        masked tokens carry de-normalized predictions and visible tokens the
        original pixels; it is for inspection only and detached.
        """
        frames = frames.to(self.mask_token.dtype)
        feats = self.encoder(frames, mask=mask, pad_valid=pad_valid)
        return self.reconstruct(frames, feats, mask)

    def reconstruct(self, frames: torch.Tensor, feats, mask: torch.Tensor):
        """Decoder half of forward, reusable with an already-encoded clip."""
        frames = frames.to(self.mask_token.dtype)
        cfg = self.encoder.cfg
        b = frames.shape[0]
        mt, mh, mw = cfg.mask_unit
        n_units = cfg.num_units

        fused = self._fuse(feats)
        dense = self.mask_token.expand(b, n_units, mt, mh, mw, self.dec_cfg.dim).clone()
        idx = feats.unit_index[:, :, None, None, None, None].expand(-1, -1, mt, mh, mw, self.dec_cfg.dim)
        dense.scatter_(1, idx, fused)

        pos = to_units(self.pos_embed.grid().unsqueeze(0), cfg.unit_grid, cfg.mask_unit)
        x = dense + pos
        x = x.reshape(b, n_units * mt * mh * mw, self.dec_cfg.dim)

        token_valid = (
            feats.pad_valid.view(b, cfg.unit_grid[0], 1, mt)
            .expand(b, cfg.unit_grid[0], cfg.unit_grid[1] * cfg.unit_grid[2], mt)
            .reshape(b, n_units, mt)
        )
        key_valid = token_valid[:, :, :, None].expand(b, n_units, mt, mh * mw).reshape(b, -1)
        for block in self.blocks:
            x = block(x, key_valid=key_valid)
        pred_units = self.head(self.norm(x)).view(b, n_units, mt, mh, mw, -1)

        all_units = torch.arange(n_units, device=frames.device).expand(b, n_units)
        pred_grid = units_to_dense(pred_units, all_units, cfg.unit_grid)
        pred_tokens = pred_grid.reshape(b, n_units * mt * mh * mw, -1)

        target = pixel_targets(frames, cfg, normalize=True)

        unit_masked = mask.to(torch.bool)
        token_masked_units = unit_masked[:, :, None, None, None].expand(b, n_units, mt, mh, mw)
        token_in_valid = token_valid[:, :, :, None, None].expand(b, n_units, mt, mh, mw)
        sel_units = token_masked_units & token_in_valid
        sel_grid = units_to_dense(
            sel_units[..., None].to(torch.float32), all_units, cfg.unit_grid
        )
        select = sel_grid.reshape(b, -1) > 0.5
        loss = masked_reconstruction_loss(pred_tokens, target, select)

        with torch.no_grad():
            raw = pixel_targets(frames, cfg, normalize=False)
            mean = raw.mean(dim=-1, keepdim=True)
            std = torch.sqrt(raw.var(dim=-1, unbiased=False, keepdim=True) + NORMALIZE_EPS)
            recon_tokens = torch.where(select[..., None], pred_tokens * std + mean, raw)
            recon = _tokens_to_frames(recon_tokens, cfg, b)
        return loss, recon


def _tokens_to_frames(tokens: torch.Tensor, cfg: EncoderConfig, batch: int) -> torch.Tensor:
    """Invert the pixel_targets layout back to [B, T, H, W, C]."""
    st, ss, c = cfg.patch_stride_t, cfg.patch_stride_s, cfg.in_channels
    t_tok, h_tok, w_tok = cfg.token_grid
    x = tokens.view(batch, t_tok, h_tok, w_tok, st, ss, ss, c)
    x = x.permute(0, 1, 4, 2, 5, 3, 6, 7)
    return x.reshape(batch, t_tok * st, h_tok * ss, w_tok * ss, c)
