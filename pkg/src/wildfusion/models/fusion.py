from __future__ import annotations

import numpy as np

from ..tensor import Tensor, ops
from ..tensor.nn import BatchNorm, Conv2d, Linear, MLP, Module
from .blocks import Bottleneck, LateFusionHead
from .config import FusionMode, FusionModelConfig


class FusionModel(Module):
    """Residual bottleneck backbone with one of six fusion modes."""

    def __init__(self, config: FusionModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed
        mode = config.fusion_mode
        dtype = np.dtype(config.dtype)
        self.np_dtype = dtype
        if mode is FusionMode.METADATA_ONLY:
            self.mlp = MLP([config.metadata_dim, *config.mlp_hidden, config.num_classes], seed, "mlp", dtype=dtype)
            return

        widths = config.stage_channel_widths
        self.stem_conv = Conv2d(config.input_channels, widths[0], 3, seed, "stem_conv", padding=1, dtype=dtype)
        self.stem_bn = BatchNorm(widths[0], dtype=dtype)
        attention = {FusionMode.CBAM: "cbam", FusionMode.MCBAM: "mcbam"}.get(mode)
        fused_stages = set(range(len(widths)) if config.early_fusion_stages is None else config.early_fusion_stages)
        self.blocks: list[Bottleneck] = []
        in_ch = widths[0]
        for s, (width, n_blocks) in enumerate(zip(widths, config.blocks_per_stage)):
            for b in range(n_blocks):
                name = f"stage{s}_block{b}"
                block = Bottleneck(
                    in_ch,
                    width,
                    stride=2 if (s > 0 and b == 0) else 1,
                    seed=seed,
                    name=name,
                    expansion=config.bottleneck_expansion,
                    metadata_dim=config.metadata_dim if mode.uses_metadata else 0,
                    early_fusion=mode is FusionMode.EARLY_FUSION and s in fused_stages,
                    attention=attention,
                    reduction=config.cbam_reduction,
                    spatial_kernel=config.spatial_kernel,
                    dtype=dtype,
                )
                setattr(self, name, block)
                self.blocks.append(block)
                in_ch = width
        self.feature_dim = in_ch
        if mode is FusionMode.LATE_FUSION:
            self.late_head = LateFusionHead(in_ch, config.metadata_dim, config.late_head_widths, seed, "late_head", dtype=dtype)
        else:
            self.fc = Linear(in_ch, config.num_classes, seed, "fc", dtype=dtype)

    def _as_input(self, x, what: str) -> Tensor:
        if isinstance(x, Tensor):
            return x if x.dtype == self.np_dtype else Tensor(x.data.astype(self.np_dtype), requires_grad=x.requires_grad)
        return Tensor(np.asarray(x, dtype=self.np_dtype))

    def image_features(self, images: Tensor, metadata: Tensor | None = None) -> Tensor:
        cfg = self.config
        if images.ndim != 4 or images.shape[1] != cfg.input_channels:
            raise ValueError(f"images must be B x {cfg.input_channels} x H x W, got {images.shape}")
        h = ops.relu(self.stem_bn(self.stem_conv(images)))
        for block in self.blocks:
            h = block(h, metadata)
        return ops.global_avg_pool(h)

    def forward(self, images=None, metadata=None) -> Tensor:
        mode = self.config.fusion_mode
        meta = None
        if mode.uses_metadata:
            if metadata is None:
                raise ValueError(f"{mode.value} mode needs metadata")
            meta = self._as_input(metadata, "metadata")
            if meta.ndim != 2 or meta.shape[1] != self.config.metadata_dim:
                raise ValueError(f"metadata must be B x {self.config.metadata_dim}, got {meta.shape}")
        if mode is FusionMode.METADATA_ONLY:
            return self.mlp(meta)
        if images is None:
            raise ValueError(f"{mode.value} mode needs images")
        img = self._as_input(images, "images")
        if meta is not None and meta.shape[0] != img.shape[0]:
            raise ValueError(f"batch mismatch: {img.shape[0]} images vs {meta.shape[0]} metadata rows")
        feats = self.image_features(img, meta if mode in (FusionMode.EARLY_FUSION, FusionMode.MCBAM) else None)
        if mode is FusionMode.LATE_FUSION:
            return self.late_head(feats, meta)
        return self.fc(feats)


def build_model(config: FusionModelConfig, seed: int = 0) -> FusionModel:
    """Deterministically initialized model; each parameter draws from an RNG keyed by (seed, name)."""
    config.validate()
    return FusionModel(config, seed)
