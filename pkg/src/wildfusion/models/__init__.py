from .blocks import (
    CBAM,
    MCBAM,
    Bottleneck,
    ChannelAttention,
    LateFusionHead,
    MetadataGate,
    SpatialAttention,
    cbam_attention,
    early_fusion_block,
    gate_override,
    late_fusion_head,
    mcbam_attention,
)
from .config import FusionMode, FusionModelConfig
from .fusion import FusionModel, build_model

__all__ = [
    "Bottleneck",
    "CBAM",
    "ChannelAttention",
    "FusionMode",
    "FusionModel",
    "FusionModelConfig",
    "LateFusionHead",
    "MCBAM",
    "MetadataGate",
    "SpatialAttention",
    "build_model",
    "cbam_attention",
    "early_fusion_block",
    "gate_override",
    "late_fusion_head",
    "mcbam_attention",
]
