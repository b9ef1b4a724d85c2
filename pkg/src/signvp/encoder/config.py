"""Hierarchical video encoder configuration and named scales."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class EncoderConfig:
    """Geometry and width of the four-stage hierarchical encoder.

    The token grid is (clip_len / patch_stride_t, img_size / patch_stride_s,
    img_size / patch_stride_s). Spatial resolution halves qpool_count times
    in total: once at each of the first two stage transitions and once after
    the final stage, so final features sit at img_size / (patch_stride_s *
    2**qpool_count) per side while the temporal extent is never pooled.
    """

    clip_len: int = 128
    img_size: int = 224
    patch_stride_t: int = 2
    patch_stride_s: int = 4
    stage_depths: tuple[int, int, int, int] = (1, 1, 2, 1)
    stage_dims: tuple[int, int, int, int] = (24, 48, 96, 192)
    stage_heads: tuple[int, int, int, int] = (1, 2, 4, 8)
    mask_unit: tuple[int, int, int] = (1, 8, 8)  # tokens per unit along (t, h, w)
    mask_ratio: float = 0.9
    qpool_count: int = 3
    drop_path: float = 0.2
    mlp_ratio: float = 4.0
    in_channels: int = 3
    sep_pos_embed: bool = True

    def __post_init__(self):
        if len(self.stage_depths) != 4 or len(self.stage_dims) != 4 or len(self.stage_heads) != 4:
            raise ValueError("stage_depths, stage_dims, stage_heads must each have 4 entries")
        for i in range(3):
            if self.stage_dims[i + 1] != 2 * self.stage_dims[i]:
                raise ValueError(f"stage dims must double: {self.stage_dims}")
        if self.clip_len % self.patch_stride_t != 0:
            raise ValueError(f"clip_len {self.clip_len} not divisible by {self.patch_stride_t}")
        if self.img_size % self.patch_stride_s != 0:
            raise ValueError(f"img_size {self.img_size} not divisible by {self.patch_stride_s}")
        reduction = self.patch_stride_s * (2**self.qpool_count)
        if self.img_size % reduction != 0:
            raise ValueError(
                f"img_size {self.img_size} not divisible by patch stride * 2^qpool = {reduction}"
            )
        if not (0.0 <= self.mask_ratio < 1.0):
            raise ValueError(f"mask_ratio must be in [0, 1), got {self.mask_ratio}")
        mt, mh, mw = self.mask_unit
        spatial_pool = 2**self.qpool_count
        if mh % spatial_pool or mw % spatial_pool:
            raise ValueError(
                f"mask unit spatial extent {self.mask_unit} must be divisible by 2^qpool={spatial_pool}"
            )
        t_tok, h_tok, w_tok = self.token_grid
        if t_tok % mt or h_tok % mh or w_tok % mw:
            raise ValueError(f"mask unit {self.mask_unit} does not tile token grid {self.token_grid}")
        for dim, heads in zip(self.stage_dims, self.stage_heads):
            if dim % heads:
                raise ValueError(f"dim {dim} not divisible by heads {heads}")

    @property
    def token_grid(self) -> tuple[int, int, int]:
        return (
            self.clip_len // self.patch_stride_t,
            self.img_size // self.patch_stride_s,
            self.img_size // self.patch_stride_s,
        )

    @property
    def unit_grid(self) -> tuple[int, int, int]:
        t_tok, h_tok, w_tok = self.token_grid
        mt, mh, mw = self.mask_unit
        return (t_tok // mt, h_tok // mh, w_tok // mw)

    @property
    def num_units(self) -> int:
        ut, uh, uw = self.unit_grid
        return ut * uh * uw

    @property
    def feature_dim(self) -> int:
        return self.stage_dims[-1]

    @property
    def final_grid(self) -> tuple[int, int, int]:
        t_tok, h_tok, w_tok = self.token_grid
        s = 2**self.qpool_count
        return (t_tok, h_tok // s, w_tok // s)


def base_scale_config(width: int = 96, **overrides) -> EncoderConfig:
    """Four-stage (2, 3, 16, 3) layout at the given base width."""
    params = dict(
        stage_depths=(2, 3, 16, 3),
        stage_dims=(width, 2 * width, 4 * width, 8 * width),
        stage_heads=(1, 2, 4, 8),
    )
    params.update(overrides)
    return EncoderConfig(**params)


def tiny_config(**overrides) -> EncoderConfig:
    """Smallest config that exercises every architectural path; for tests."""
    params = dict(
        clip_len=8,
        img_size=32,
        stage_depths=(1, 1, 1, 1),
        stage_dims=(4, 8, 16, 32),
        stage_heads=(1, 1, 2, 2),
        drop_path=0.0,
    )
    params.update(overrides)
    return EncoderConfig(**params)
