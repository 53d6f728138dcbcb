from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from ..metadata import METADATA_DIM


class FusionMode(str, enum.Enum):
    IMAGE_ONLY = "image_only"
    METADATA_ONLY = "metadata_only"
    LATE_FUSION = "late_fusion"
    EARLY_FUSION = "early_fusion"
    CBAM = "cbam"
    MCBAM = "mcbam"

    @property
    def uses_metadata(self) -> bool:
        return self in (FusionMode.METADATA_ONLY, FusionMode.LATE_FUSION, FusionMode.EARLY_FUSION, FusionMode.MCBAM)

    @property
    def uses_images(self) -> bool:
        return self is not FusionMode.METADATA_ONLY


@dataclass
class FusionModelConfig:
    """Backbone shape plus the fusion mode.

    ``stage_channel_widths`` are bottleneck *output* widths; the inner width of
    each bottleneck is ``width // bottleneck_expansion``.  ``late_head_widths``
    are the output widths of the three late-fusion layers, the last of which
    must equal ``num_classes``.
    """

    fusion_mode: FusionMode = FusionMode.IMAGE_ONLY
    input_image_side: int = 64
    input_channels: int = 3
    stage_channel_widths: list = field(default_factory=lambda: [16, 32, 64])
    blocks_per_stage: list = field(default_factory=lambda: [2, 2, 2])
    metadata_dim: int = METADATA_DIM
    num_classes: int = 13
    late_head_widths: list | None = None
    mlp_hidden: list = field(default_factory=lambda: [128, 64])
    bottleneck_expansion: int = 4
    cbam_reduction: int = 16
    spatial_kernel: int = 7
    early_fusion_stages: list | None = None
    dtype: str = "float64"

    def __post_init__(self):
        self.fusion_mode = FusionMode(self.fusion_mode)
        self.stage_channel_widths = [int(w) for w in self.stage_channel_widths]
        self.blocks_per_stage = [int(b) for b in self.blocks_per_stage]
        self.mlp_hidden = [int(h) for h in self.mlp_hidden]
        if self.late_head_widths is None:
            self.late_head_widths = [128, 64, self.num_classes]
        self.late_head_widths = [int(w) for w in self.late_head_widths]
        self.validate()

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if len(self.stage_channel_widths) != len(self.blocks_per_stage) or not self.stage_channel_widths:
            raise ValueError(
                f"stage_channel_widths {self.stage_channel_widths} and blocks_per_stage "
                f"{self.blocks_per_stage} must be non-empty and of equal length"
            )
        if any(w < 1 for w in self.stage_channel_widths) or any(b < 1 for b in self.blocks_per_stage):
            raise ValueError("stage widths and block counts must be positive")
        if len(self.late_head_widths) != 3:
            raise ValueError(f"late_head_widths needs exactly three layers, got {self.late_head_widths}")
        if self.late_head_widths[-1] != self.num_classes:
            raise ValueError(f"last late-head width {self.late_head_widths[-1]} != num_classes {self.num_classes}")
        if self.fusion_mode.uses_metadata and self.metadata_dim <= 0:
            raise ValueError(f"{self.fusion_mode.value} needs metadata_dim > 0")
        if self.input_image_side < 2 ** (len(self.stage_channel_widths) - 1):
            raise ValueError("input_image_side too small for the number of stride-2 stages")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype}")
        if self.early_fusion_stages is not None:
            bad = [s for s in self.early_fusion_stages if not 0 <= s < len(self.stage_channel_widths)]
            if bad:
                raise ValueError(f"early_fusion_stages out of range: {bad}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fusion_mode"] = self.fusion_mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FusionModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
