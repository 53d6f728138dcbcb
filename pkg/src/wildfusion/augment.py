"""Image augmentation: flip, rotation, color jitter and cutout.

Images are H x W x 3 float arrays in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from scipy import ndimage


@dataclass(frozen=True)
class AugmentationConfig:
    hflip_prob: float = 0.5
    rotation_prob: float = 1.0
    rotation_range_degrees: tuple = (-45.0, 45.0)
    jitter_prob: float = 1.0
    brightness: float = 0.1
    contrast: float = 0.1
    saturation: float = 0.1
    hue: float = 0.1
    cutout_prob: float = 1.0
    cutout_holes: int = 8
    cutout_size: int = 32
    seed: int = 0

    def __post_init__(self):
        for name in ("hflip_prob", "rotation_prob", "jitter_prob", "cutout_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        lo, hi = self.rotation_range_degrees
        if lo > hi:
            raise ValueError("rotation range is reversed")


@dataclass
class AppliedAugmentation:
    """The random choices made for one image."""

    flipped: bool = False
    angle: float = 0.0
    brightness: float = 1.0
    contrast: float = 1.0
    saturation: float = 1.0
    hue_shift: float = 0.0
    holes: list = field(default_factory=list)  # (top, left) of each cutout square


def hflip(image: np.ndarray) -> np.ndarray:
    return image[:, ::-1].copy()


def rotate(image: np.ndarray, angle: float) -> np.ndarray:
    """Bilinear rotation about the center; exposed corners are zero."""
    if angle == 0.0:
        return image.copy()
    return ndimage.rotate(image, angle, axes=(1, 0), reshape=False, order=1, mode="constant", cval=0.0)


def color_jitter(image, brightness=1.0, contrast=1.0, saturation=1.0, hue_shift=0.0) -> np.ndarray:
    out = np.clip(image * brightness, 0.0, 1.0)
    gray_mean = out.mean()
    out = np.clip((out - gray_mean) * contrast + gray_mean, 0.0, 1.0)
    if saturation != 1.0 or hue_shift != 0.0:
        hsv = rgb_to_hsv(out)
        hsv[..., 0] = (hsv[..., 0] + hue_shift) % 1.0
        hsv[..., 1] = np.clip(hsv[..., 1] * saturation, 0.0, 1.0)
        out = hsv_to_rgb(hsv)
    return out


def cutout(image: np.ndarray, holes, size: int) -> np.ndarray:
    out = image.copy()
    for top, left in holes:
        out[top : top + size, left : left + size] = 0.0
    return out


def augment_image(image: np.ndarray, config: AugmentationConfig, rng: np.random.Generator, return_params: bool = False):
    """Flip, rotate, jitter, then cut ``cutout_holes`` zero squares.

    Output dimensions always equal input dimensions.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got {image.shape}")
    h, w = image.shape[:2]
    if config.cutout_prob > 0 and config.cutout_holes > 0 and (h < config.cutout_size or w < config.cutout_size):
        raise ValueError(f"image {h}x{w} smaller than cutout hole {config.cutout_size}x{config.cutout_size}")
    applied = AppliedAugmentation()
    out = image
    if rng.random() < config.hflip_prob:
        applied.flipped = True
        out = hflip(out)
    if rng.random() < config.rotation_prob:
        applied.angle = float(rng.uniform(*config.rotation_range_degrees))
        out = rotate(out, applied.angle)
    if rng.random() < config.jitter_prob:
        applied.brightness = float(rng.uniform(1 - config.brightness, 1 + config.brightness))
        applied.contrast = float(rng.uniform(1 - config.contrast, 1 + config.contrast))
        applied.saturation = float(rng.uniform(1 - config.saturation, 1 + config.saturation))
        applied.hue_shift = float(rng.uniform(-config.hue, config.hue))
        out = color_jitter(out, applied.brightness, applied.contrast, applied.saturation, applied.hue_shift)
    if config.cutout_holes and rng.random() < config.cutout_prob:
        s = config.cutout_size
        applied.holes = [
            (int(rng.integers(0, h - s + 1)), int(rng.integers(0, w - s + 1))) for _ in range(config.cutout_holes)
        ]
        out = cutout(out, applied.holes, s)
    out = np.ascontiguousarray(out)
    return (out, applied) if return_params else out


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per sample so parallel augmentation stays deterministic."""
    return np.random.default_rng([seed, index])
