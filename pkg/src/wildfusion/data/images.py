from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

DEFAULT_BAND_HEIGHT = 0
TARGET_SIDE = 512


class ImageError(ValueError):
    pass


def load_image(path) -> np.ndarray:
    """H x W x 3 float image in [0, 1] from a raster file or a ``.npy`` array."""
    path = Path(path)
    if path.suffix == ".npy":
        arr = np.load(path)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ImageError(f"{path}: expected H x W x 3 array, got {arr.shape}")
        return arr.astype(np.float64)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageError(f"{path}: cannot decode image ({exc})") from None
    return arr


def _resize(image: np.ndarray, side: int) -> np.ndarray:
    if image.dtype == np.uint8:
        return np.asarray(Image.fromarray(image).resize((side, side), Image.BILINEAR))
    channels = [
        np.asarray(Image.fromarray(image[..., c].astype(np.float32), mode="F").resize((side, side), Image.BILINEAR))
        for c in range(image.shape[2])
    ]
    return np.stack(channels, axis=-1).astype(image.dtype)


def preprocess_image(image, band_top: int = DEFAULT_BAND_HEIGHT, band_bottom: int | None = None, target_side: int = TARGET_SIDE) -> np.ndarray:
    """Strip the top/bottom information bands, then resize to a square ``target_side``."""
    if isinstance(image, Image.Image):
        image = np.asarray(image.convert("RGB"))
    image = np.asarray(image)
    if image.ndim != 3:
        raise ImageError(f"expected H x W x C image, got shape {image.shape}")
    band_bottom = band_top if band_bottom is None else band_bottom
    if band_top < 0 or band_bottom < 0:
        raise ImageError("band heights must be non-negative")
    h = image.shape[0]
    if h <= band_top + band_bottom:
        raise ImageError(f"image height {h} not larger than bands {band_top}+{band_bottom}")
    cropped = image[band_top : h - band_bottom]
    if cropped.shape[0] == target_side and cropped.shape[1] == target_side:
        return cropped.copy()
    return _resize(cropped, target_side)


def preprocess_image_file(path, band_top: int = DEFAULT_BAND_HEIGHT, band_bottom: int | None = None, target_side: int = TARGET_SIDE) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageError(f"{path}: cannot decode image ({exc})") from None
    return preprocess_image(arr, band_top, band_bottom, target_side)


def save_image(path, image: np.ndarray) -> None:
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, image)
        return
    arr = image if image.dtype == np.uint8 else np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)
