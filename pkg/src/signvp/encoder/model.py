"""Hierarchical video transformer with mask-unit attention and padding masks.

Tokens are kept grouped by mask unit throughout: activations have shape
[B, U, mt, mh, mw, C] where U counts kept units and (mt, mh, mw) is the
within-unit token extent. Stages 1-2 attend within units, stages 3-4
globally over all kept tokens. Query pooling halves (mh, mw) at the first
block of stages 2 and 3; a final 2x spatial max-pool follows the last
stage. The temporal extent is never pooled, so per-token temporal validity
is constant across depth and attention simply never reads keys at padded
temporal positions.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .config import EncoderConfig


def _trunc_normal_init(module: nn.Module) -> None:
    if isinstance(module, (nn.Linear, nn.Conv3d)):
        nn.init.trunc_normal_(module.weight, std=0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)


class DropPath(nn.Module):
    """Per-sample residual branch dropout with rescaling."""

    def __init__(self, p: float):
        super().__init__()
        self.p = p

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.p == 0.0 or not self.training:
            return x
        keep = 1.0 - self.p
        shape = (x.shape[0],) + (1,) * (x.ndim - 1)
        gate = torch.rand(shape, dtype=x.dtype, device=x.device) < keep
        return x * gate.to(x.dtype) / keep

    def extra_repr(self) -> str:
        return f"p={self.p}"


class PatchEmbed(nn.Module):
    """Non-overlapping strided linear projection over (t, s, s, C) pixel blocks."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        kernel = (cfg.patch_stride_t, cfg.patch_stride_s, cfg.patch_stride_s)
        self.proj = nn.Conv3d(cfg.in_channels, cfg.stage_dims[0], kernel_size=kernel, stride=kernel)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        expected = (self.cfg.clip_len, self.cfg.img_size, self.cfg.img_size, self.cfg.in_channels)
        if tuple(frames.shape[1:]) != expected:
            raise ValueError(
                f"frames shape {tuple(frames.shape[1:])} does not match config; expected {expected}"
            )
        x = self.proj(frames.permute(0, 4, 1, 2, 3))  # [B, C0, T_tok, H_tok, W_tok]
        return x.permute(0, 2, 3, 4, 1)


class PositionEmbedding(nn.Module):
    """Learnable embedding per (t, h, w) token coordinate, separable or joint."""

    def __init__(self, token_grid: tuple[int, int, int], dim: int, separable: bool = True):
        super().__init__()
        self.token_grid = tuple(token_grid)
        self.separable = separable
        t_tok, h_tok, w_tok = token_grid
        if separable:
            self.temporal = nn.Parameter(torch.zeros(t_tok, dim))
            self.spatial = nn.Parameter(torch.zeros(h_tok * w_tok, dim))
            nn.init.trunc_normal_(self.temporal, std=0.02)
            nn.init.trunc_normal_(self.spatial, std=0.02)
        else:
            self.joint = nn.Parameter(torch.zeros(t_tok * h_tok * w_tok, dim))
            nn.init.trunc_normal_(self.joint, std=0.02)

    @property
    def dim(self) -> int:
        return (self.temporal if self.separable else self.joint).shape[-1]

    def grid(self) -> torch.Tensor:
        """Dense [T_tok, H_tok, W_tok, dim] embedding."""
        t_tok, h_tok, w_tok = self.token_grid
        if self.separable:
            return self.temporal[:, None, None, :] + self.spatial.view(1, h_tok, w_tok, -1)
        return self.joint.view(t_tok, h_tok, w_tok, -1)


def _interp_rows(table: torch.Tensor, new_len: int) -> torch.Tensor:
    """Linear interpolation along dim 0 with exact endpoints; identity when lengths match."""
    old_len = table.shape[0]
    if new_len == old_len:
        return table.detach().clone()
    if new_len == 1:
        return table[:1].detach().clone()
    pos = torch.arange(new_len, dtype=torch.float64) * (old_len - 1) / (new_len - 1)
    lo = pos.floor().long().clamp(max=old_len - 1)
    hi = pos.ceil().long().clamp(max=old_len - 1)
    frac = (pos - lo.to(pos.dtype)).to(table.dtype).unsqueeze(-1)
    out = table[lo] * (1 - frac) + table[hi] * frac
    exact = lo == hi
    out[exact] = table[lo[exact]]
    return out.detach()


def interpolate_pos_embed(
    old: PositionEmbedding, new_grid: tuple[int, int, int]
) -> PositionEmbedding:
    """Resize along the temporal axis only; spatial layout must be preserved."""
    old_t, old_h, old_w = old.token_grid
    new_t, new_h, new_w = new_grid
    if (old_h, old_w) != (new_h, new_w):
        raise ValueError(
            f"spatial grid mismatch: {(old_h, old_w)} vs {(new_h, new_w)}; only temporal resize supported"
        )
    new = PositionEmbedding(new_grid, old.dim, separable=old.separable)
    with torch.no_grad():
        if old.separable:
            new.temporal.copy_(_interp_rows(old.temporal, new_t))
            new.spatial.copy_(old.spatial)
        else:
            table = old.joint.view(old_t, old_h * old_w * old.dim)
            new.joint.copy_(_interp_rows(table, new_t).view(new_t * new_h * new_w, old.dim))
    return new


def to_units(x: torch.Tensor, unit_grid, mask_unit) -> torch.Tensor:
    """[B, T_tok, H_tok, W_tok, C] -> [B, U, mt, mh, mw, C], unit-major row order."""
    b, _, _, _, c = x.shape
    nt, nh, nw = unit_grid
    mt, mh, mw = mask_unit
    x = x.view(b, nt, mt, nh, mh, nw, mw, c)
    x = x.permute(0, 1, 3, 5, 2, 4, 6, 7)
    return x.reshape(b, nt * nh * nw, mt, mh, mw, c)


def units_to_dense(
    x: torch.Tensor, unit_index: torch.Tensor, unit_grid
) -> torch.Tensor:
    """Scatter kept units back onto the full grid (zeros at dropped units).

    Returns [B, nt*mt, nh*mh', nw*mw', C] using the units' current
    within-unit extent.
    """
    b, _, mt, mh, mw, c = x.shape
    nt, nh, nw = unit_grid
    dense = x.new_zeros(b, nt * nh * nw, mt, mh, mw, c)
    idx = unit_index[:, :, None, None, None, None].expand(-1, -1, mt, mh, mw, c)
    dense.scatter_(1, idx, x)
    dense = dense.view(b, nt, nh, nw, mt, mh, mw, c)
    dense = dense.permute(0, 1, 4, 2, 5, 3, 6, 7)
    return dense.reshape(b, nt * mt, nh * mh, nw * mw, c)


def _pool_spatial(x: torch.Tensor) -> torch.Tensor:
    """2x2 max-pool over the within-unit spatial extent."""
    b, u, mt, mh, mw, c = x.shape
    x = x.view(b, u, mt, mh // 2, 2, mw // 2, 2, c)
    return x.amax(dim=(4, 6))


def _key_bias(key_valid: torch.Tensor, dtype: torch.dtype) -> torch.Tensor:
    """Additive attention bias: -inf at invalid keys, [G, 1, 1, Nk].

    Groups with no valid key fall back to unmasked attention; their outputs
    are garbage by construction and are never consumed downstream.
    """
    any_valid = key_valid.any(dim=-1, keepdim=True)
    effective = key_valid | ~any_valid
    bias = torch.zeros(key_valid.shape, dtype=dtype, device=key_valid.device)
    bias.masked_fill_(~effective, float("-inf"))
    return bias[:, None, None, :]


class EncoderBlock(nn.Module):
    """Pre-norm attention + MLP block with optional q-pooling and dim expansion."""

    def __init__(
        self,
        dim: int,
        dim_out: int,
        heads: int,
        local: bool,
        q_pool: bool,
        mlp_ratio: float,
        drop_path: float,
    ):
        super().__init__()
        self.dim = dim
        self.dim_out = dim_out
        self.heads = heads
        self.local = local
        self.q_pool = q_pool
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim_out)
        self.proj = nn.Linear(dim_out, dim_out)
        self.skip_proj = nn.Linear(dim, dim_out) if dim != dim_out else None
        self.norm2 = nn.LayerNorm(dim_out)
        hidden = int(dim_out * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim_out, hidden), nn.GELU(), nn.Linear(hidden, dim_out))
        self.drop_path1 = DropPath(drop_path)
        self.drop_path2 = DropPath(drop_path)

    def _attend(self, x_norm: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
        b, u, mt, mh, mw, _ = x_norm.shape
        qkv = self.qkv(x_norm)
        q, k, v = qkv.chunk(3, dim=-1)
        if self.q_pool:
            q = _pool_spatial(q)
        mh_q, mw_q = q.shape[3], q.shape[4]

        key_valid = valid[:, :, :, None, None].expand(b, u, mt, mh, mw)
        if self.local:
            groups = b * u
            q = q.reshape(groups, mt * mh_q * mw_q, self.dim_out)
            k = k.reshape(groups, mt * mh * mw, self.dim_out)
            v = v.reshape(groups, mt * mh * mw, self.dim_out)
            key_valid = key_valid.reshape(groups, mt * mh * mw)
        else:
            groups = b
            q = q.reshape(b, u * mt * mh_q * mw_q, self.dim_out)
            k = k.reshape(b, u * mt * mh * mw, self.dim_out)
            v = v.reshape(b, u * mt * mh * mw, self.dim_out)
            key_valid = key_valid.reshape(b, u * mt * mh * mw)

        head_dim = self.dim_out // self.heads
        q = q.view(groups, -1, self.heads, head_dim).transpose(1, 2)
        k = k.view(groups, -1, self.heads, head_dim).transpose(1, 2)
        v = v.view(groups, -1, self.heads, head_dim).transpose(1, 2)
        bias = _key_bias(key_valid, q.dtype)
        out = F.scaled_dot_product_attention(q, k, v, attn_mask=bias)
        out = out.transpose(1, 2).reshape(groups, -1, self.dim_out)
        out = self.proj(out)
        return out.view(b, u, mt, mh_q, mw_q, self.dim_out)

    def forward(self, x: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
        x_norm = self.norm1(x)
        residual = x if self.skip_proj is None else self.skip_proj(x_norm)
        if self.q_pool:
            residual = _pool_spatial(residual)
        x = residual + self.drop_path1(self._attend(x_norm, valid))
        return x + self.drop_path2(self.mlp(self.norm2(x)))


@dataclass
class MultiScaleFeatures:
    """Per-stage and final activations plus the bookkeeping to re-grid them.

    stages[i] has shape [B, U_kept, mt, mh_i, mw_i, dim_i] recorded at the
    end of stage i, before any pooling that follows it. final is the
    post-final-pool map. unit_index holds each kept unit's flat position in
    the unit grid; unit_valid marks temporal validity per within-unit slot.
    """

    stages: list[torch.Tensor]
    final: torch.Tensor
    unit_index: torch.Tensor  # [B, U_kept] long
    unit_valid: torch.Tensor  # [B, U_kept, mt] bool
    unit_grid: tuple[int, int, int]
    mask_unit: tuple[int, int, int]
    pad_valid: torch.Tensor  # [B, T_tok] bool

    def final_dense(self) -> torch.Tensor:
        """[B, T_tok, H_final, W_final, D]; dropped units are zero-filled."""
        return units_to_dense(self.final, self.unit_index, self.unit_grid)

    def stage_dense(self, i: int) -> torch.Tensor:
        return units_to_dense(self.stages[i], self.unit_index, self.unit_grid)


class HierarchicalVideoEncoder(nn.Module):
    """Four-stage video transformer over mask units; see module docstring."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.patch_embed = PatchEmbed(cfg)
        self.pos_embed = PositionEmbedding(
            cfg.token_grid, cfg.stage_dims[0], separable=cfg.sep_pos_embed
        )
        depths = cfg.stage_depths
        depth = sum(depths)
        stage_starts = [sum(depths[:i]) for i in range(4)]
        self.stage_ends = [sum(depths[: i + 1]) - 1 for i in range(4)]
        pool_blocks = {stage_starts[1], stage_starts[2]}  # third pool happens after the last stage
        rates = torch.linspace(0, cfg.drop_path, depth).tolist()

        blocks = []
        for i in range(depth):
            stage = next(s for s in range(3, -1, -1) if i >= stage_starts[s])
            dim_in = cfg.stage_dims[stage - 1] if i == stage_starts[stage] and stage > 0 else cfg.stage_dims[stage]
            blocks.append(
                EncoderBlock(
                    dim=dim_in,
                    dim_out=cfg.stage_dims[stage],
                    heads=cfg.stage_heads[stage],
                    local=stage < 2,
                    q_pool=i in pool_blocks,
                    mlp_ratio=cfg.mlp_ratio,
                    drop_path=rates[i],
                )
            )
        self.blocks = nn.ModuleList(blocks)
        self.apply(_trunc_normal_init)

    def _unit_validity(self, pad_valid: torch.Tensor) -> torch.Tensor:
        """[B, T_tok] -> [B, U, mt] following unit-major ordering."""
        b = pad_valid.shape[0]
        nt, nh, nw = self.cfg.unit_grid
        mt = self.cfg.mask_unit[0]
        per_unit = pad_valid.view(b, nt, 1, mt).expand(b, nt, nh * nw, mt)
        return per_unit.reshape(b, nt * nh * nw, mt)

    def forward(
        self,
        frames: torch.Tensor,
        mask: torch.Tensor | None = None,
        pad_valid: torch.Tensor | None = None,
        keep_order: torch.Tensor | None = None,
    ) -> MultiScaleFeatures:
        """Encode frames [B, T, H, W, C].

        mask: optional [B, U] bool, True = dropped unit; every sample must
        drop the same number of units. pad_valid: optional [B, T_tok] bool
        marking valid temporal tokens as a prefix. keep_order: optional
        [B, U_kept] long overriding the order in which kept units are
        processed (outputs are invariant to it).
        """
        param_dtype = self.patch_embed.proj.weight.dtype
        frames = frames.to(param_dtype)
        x = self.patch_embed(frames)
        x = x + self.pos_embed.grid().unsqueeze(0)
        x = to_units(x, self.cfg.unit_grid, self.cfg.mask_unit)
        b, total_units = x.shape[0], x.shape[1]
        t_tok = self.cfg.token_grid[0]

        if pad_valid is None:
            pad_valid = torch.ones(b, t_tok, dtype=torch.bool, device=x.device)
        else:
            pad_valid = pad_valid.to(torch.bool)
            if pad_valid.shape != (b, t_tok):
                raise ValueError(f"pad mask shape {tuple(pad_valid.shape)} != {(b, t_tok)}")
            counts = pad_valid.sum(dim=1)
            prefix_ok = pad_valid.cumsum(dim=1).eq(
                torch.arange(1, t_tok + 1, device=x.device)
            ) | ~pad_valid
            if not prefix_ok.all() or (counts == 0).any():
                raise ValueError("pad mask must be a non-empty valid prefix per sample")
        valid = self._unit_validity(pad_valid)

        if mask is not None:
            mask = mask.to(torch.bool)
            if mask.shape != (b, total_units):
                raise ValueError(f"mask shape {tuple(mask.shape)} != {(b, total_units)}")
            kept_counts = (~mask).sum(dim=1)
            if kept_counts.min() != kept_counts.max():
                raise ValueError("every sample in a batch must keep the same number of units")
            n_keep = int(kept_counts[0])
            if n_keep == 0:
                raise ValueError("no visible tokens")
            if keep_order is None:
                unit_index = torch.argsort(mask.to(torch.int8), dim=1, stable=True)[:, :n_keep]
            else:
                unit_index = keep_order.to(torch.long)
            gather_idx = unit_index[:, :, None, None, None, None].expand(
                -1, -1, *x.shape[2:]
            )
            x = x.gather(1, gather_idx)
            valid = valid.gather(1, unit_index[:, :, None].expand(-1, -1, valid.shape[-1]))
        else:
            unit_index = torch.arange(total_units, device=x.device).expand(b, total_units)
            if keep_order is not None:
                unit_index = keep_order.to(torch.long)
                gather_idx = unit_index[:, :, None, None, None, None].expand(-1, -1, *x.shape[2:])
                x = x.gather(1, gather_idx)
                valid = valid.gather(1, unit_index[:, :, None].expand(-1, -1, valid.shape[-1]))

        stage_feats = []
        stage_end_set = set(self.stage_ends)
        for i, block in enumerate(self.blocks):
            x = block(x, valid)
            if i in stage_end_set:
                stage_feats.append(x)

        final = _pool_spatial(x)
        return MultiScaleFeatures(
            stages=stage_feats,
            final=final,
            unit_index=unit_index,
            unit_valid=valid,
            unit_grid=self.cfg.unit_grid,
            mask_unit=self.cfg.mask_unit,
            pad_valid=pad_valid,
        )
