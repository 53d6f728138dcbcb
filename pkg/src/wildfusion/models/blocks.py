"""Residual bottleneck with optional metadata gating and attention.

Gate modules expose a ``forced`` flag (see :func:`gate_override`); a forced gate
returns exact ones so the gated block reduces to its ungated counterpart.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..tensor import Tensor, ops
from ..tensor.nn import BatchNorm, Conv2d, Linear, MLP, Module

GATE_KINDS = ("early", "channel", "spatial", "metadata")


class _Gate(Module):
    kind = ""

    def __init__(self):
        super().__init__()
        self.forced = False

    def _ones(self, shape, dtype) -> Tensor:
        return Tensor(np.ones(shape, dtype=dtype))


class MetadataGate(_Gate):
    """``sigmoid(Linear(M))``: one value in (0, 1) per channel and sample."""

    def __init__(self, metadata_dim: int, channels: int, seed: int, name: str, kind: str = "early", dtype=np.float64):
        super().__init__()
        self.kind = kind
        self.proj = Linear(metadata_dim, channels, seed, name + ".proj", dtype=dtype)
        self.channels = channels

    def forward(self, metadata: Tensor) -> Tensor:
        if self.forced:
            return self._ones((metadata.shape[0], self.channels), metadata.dtype)
        return ops.sigmoid(self.proj(metadata))


class ChannelAttention(_Gate):
    """``sigmoid(MLP(avgpool F) + MLP(maxpool F))`` with one shared MLP."""

    kind = "channel"

    def __init__(self, channels: int, reduction: int, seed: int, name: str, dtype=np.float64):
        super().__init__()
        hidden = max(channels // reduction, 1)
        self.mlp = MLP([channels, hidden, channels], seed, name + ".mlp", dtype=dtype)
        self.channels = channels

    def forward(self, F: Tensor) -> Tensor:
        if self.forced:
            return self._ones(F.shape[:2], F.dtype)
        return ops.sigmoid(ops.add(self.mlp(ops.global_avg_pool(F)), self.mlp(ops.global_max_pool(F))))


class SpatialAttention(_Gate):
    """``sigmoid(conv_k([channel-mean F; channel-max F]))`` -> B x 1 x H x W."""

    kind = "spatial"

    def __init__(self, kernel: int, seed: int, name: str, dtype=np.float64):
        super().__init__()
        self.conv = Conv2d(2, 1, kernel, seed, name + ".conv", padding=kernel // 2, dtype=dtype)

    def forward(self, F: Tensor) -> Tensor:
        if self.forced:
            b, _, h, w = F.shape
            return self._ones((b, 1, h, w), F.dtype)
        pooled = ops.concat([ops.global_avg_pool(F, axis="channel"), ops.global_max_pool(F, axis="channel")], axis=1)
        return ops.sigmoid(self.conv(pooled))


class CBAM(Module):
    """Channel attention then spatial attention on the refined map."""

    def __init__(self, channels: int, reduction: int, spatial_kernel: int, seed: int, name: str, dtype=np.float64):
        super().__init__()
        self.channel = ChannelAttention(channels, reduction, seed, name + ".channel", dtype=dtype)
        self.spatial = SpatialAttention(spatial_kernel, seed, name + ".spatial", dtype=dtype)

    def forward(self, F: Tensor, metadata: Tensor | None = None) -> Tensor:
        F1 = ops.mul(F, self.channel(F))
        return ops.mul(F1, self.spatial(F1))


class MCBAM(CBAM):
    """CBAM followed by a per-channel metadata gate on the spatially refined map."""

    def __init__(self, channels, reduction, spatial_kernel, metadata_dim, seed, name, dtype=np.float64):
        super().__init__(channels, reduction, spatial_kernel, seed, name, dtype=dtype)
        self.meta = MetadataGate(metadata_dim, channels, seed, name + ".meta", kind="metadata", dtype=dtype)

    def forward(self, F: Tensor, metadata: Tensor | None = None) -> Tensor:
        if metadata is None:
            raise ValueError("MCBAM needs a metadata tensor")
        F2 = super().forward(F)
        return ops.mul(F2, self.meta(metadata))


def cbam_attention(module: CBAM, F: Tensor) -> Tensor:
    return CBAM.forward(module, F)


def mcbam_attention(module: MCBAM, F: Tensor, metadata: Tensor) -> Tensor:
    return module.forward(F, metadata)


class Bottleneck(Module):
    """1x1 reduce -> 3x3 (strided) -> 1x1 expand, plus shortcut.

    With ``early_fusion`` each convolution output is multiplied by a metadata
    gate before its normalization.  With ``attention`` a CBAM or MCBAM module
    refines the main path before the residual addition.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        stride: int,
        seed: int,
        name: str,
        expansion: int = 4,
        metadata_dim: int = 0,
        early_fusion: bool = False,
        attention: str | None = None,
        reduction: int = 16,
        spatial_kernel: int = 7,
        dtype=np.float64,
    ):
        super().__init__()
        mid = max(out_channels // expansion, 1)
        self.in_channels, self.out_channels, self.stride = in_channels, out_channels, stride
        self.conv1 = Conv2d(in_channels, mid, 1, seed, name + ".conv1", dtype=dtype)
        self.bn1 = BatchNorm(mid, dtype=dtype)
        self.conv2 = Conv2d(mid, mid, 3, seed, name + ".conv2", stride=stride, padding=1, dtype=dtype)
        self.bn2 = BatchNorm(mid, dtype=dtype)
        self.conv3 = Conv2d(mid, out_channels, 1, seed, name + ".conv3", dtype=dtype)
        self.bn3 = BatchNorm(out_channels, dtype=dtype)
        if stride != 1 or in_channels != out_channels:
            self.down_conv = Conv2d(in_channels, out_channels, 1, seed, name + ".down_conv", stride=stride, dtype=dtype)
            self.down_bn = BatchNorm(out_channels, dtype=dtype)
        else:
            self.down_conv = None
        self.early_fusion = early_fusion
        if early_fusion:
            if metadata_dim <= 0:
                raise ValueError("early fusion needs metadata_dim > 0")
            self.gate1 = MetadataGate(metadata_dim, mid, seed, name + ".gate1", dtype=dtype)
            self.gate2 = MetadataGate(metadata_dim, mid, seed, name + ".gate2", dtype=dtype)
            self.gate3 = MetadataGate(metadata_dim, out_channels, seed, name + ".gate3", dtype=dtype)
        if attention == "cbam":
            self.attention = CBAM(out_channels, reduction, spatial_kernel, seed, name + ".attention", dtype=dtype)
        elif attention == "mcbam":
            self.attention = MCBAM(
                out_channels, reduction, spatial_kernel, metadata_dim, seed, name + ".attention", dtype=dtype
            )
        elif attention is None:
            self.attention = None
        else:
            raise ValueError(f"unknown attention {attention!r}")

    def forward(self, x: Tensor, metadata: Tensor | None = None) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"bottleneck expects B x {self.in_channels} x H x W, got {x.shape}")
        gated = self.early_fusion
        if gated and metadata is None:
            raise ValueError("early-fusion block needs a metadata tensor")
        h = self.conv1(x)
        if gated:
            h = ops.mul(h, self.gate1(metadata))
        h = ops.relu(self.bn1(h))
        h = self.conv2(h)
        if gated:
            h = ops.mul(h, self.gate2(metadata))
        h = ops.relu(self.bn2(h))
        h = self.conv3(h)
        if gated:
            h = ops.mul(h, self.gate3(metadata))
        h = self.bn3(h)
        if self.attention is not None:
            h = self.attention(h, metadata)
        shortcut = x if self.down_conv is None else self.down_bn(self.down_conv(x))
        return ops.relu(ops.add(h, shortcut))


def early_fusion_block(block: Bottleneck, x: Tensor, metadata: Tensor) -> Tensor:
    if not block.early_fusion:
        raise ValueError("block was built without early fusion")
    return block(x, metadata)


class LateFusionHead(Module):
    """Concatenate image features and metadata, then three linear layers.

    ReLU follows the first two layers only; the third emits raw logits.
    """

    def __init__(self, image_dim: int, metadata_dim: int, widths: list[int], seed: int, name: str, dtype=np.float64):
        super().__init__()
        if len(widths) != 3:
            raise ValueError("late fusion head needs three layer widths")
        self.image_dim, self.metadata_dim = image_dim, metadata_dim
        self.g = MLP([image_dim + metadata_dim] + list(widths), seed, name, dtype=dtype)

    @property
    def input_width(self) -> int:
        return self.image_dim + self.metadata_dim

    def forward(self, v1: Tensor, v2: Tensor) -> Tensor:
        if v1.ndim != 2 or v1.shape[1] != self.image_dim:
            raise ValueError(f"late fusion: image features {v1.shape}, expected B x {self.image_dim}")
        if v2.ndim != 2 or v2.shape[1] != self.metadata_dim or v2.shape[0] != v1.shape[0]:
            raise ValueError(f"late fusion: metadata {v2.shape}, expected {v1.shape[0]} x {self.metadata_dim}")
        return self.g(ops.concat([v1, v2], axis=1))


def late_fusion_head(head: LateFusionHead, v1: Tensor, v2: Tensor) -> Tensor:
    return head(v1, v2)


@contextmanager
def gate_override(module: Module, *kinds: str):
    """Force the named gate kinds (default: all) to output exact ones."""
    kinds = kinds or GATE_KINDS
    unknown = set(kinds) - set(GATE_KINDS)
    if unknown:
        raise ValueError(f"unknown gate kinds {sorted(unknown)}")
    touched = [m for m in module.modules() if isinstance(m, _Gate) and m.kind in kinds]
    previous = [m.forced for m in touched]
    for m in touched:
        m.forced = True
    try:
        yield touched
    finally:
        for m, p in zip(touched, previous):
            m.forced = p
