"""Turn a manifest into model-ready arrays."""

from __future__ import annotations

import numpy as np

from ..metadata import MetadataEncoder
from ..training import ArrayDataset
from .images import load_image, preprocess_image
from .records import Manifest


def class_names(records) -> list[str]:
    return sorted({r.class_label for r in records})


def encode_manifest(manifest: Manifest) -> np.ndarray:
    return MetadataEncoder(manifest.stats).encode_many(r.raw_metadata() for r in manifest.records)


def build_arrays(manifest: Manifest, names=None, image_side: int | None = None, band_top: int = 0, band_bottom: int | None = None, dtype=np.float64, camera_bands: dict | None = None):
    """``(ArrayDataset, class names)``; images are loaded only when ``image_side`` is given.

    ``camera_bands`` maps a location id to its own ``(top, bottom)`` band
    heights; other cameras use ``band_top`` / ``band_bottom``.
    """
    records = manifest.records
    names = list(names) if names is not None else class_names(records)
    lookup = {n: i for i, n in enumerate(names)}
    unknown = sorted({r.class_label for r in records} - set(lookup))
    if unknown:
        raise ValueError(f"labels not in the class list: {unknown}")
    labels = np.array([lookup[r.class_label] for r in records], dtype=np.int64)
    metadata = encode_manifest(manifest).astype(dtype)
    images = None
    if image_side is not None:
        images = np.empty((len(records), 3, image_side, image_side), dtype=dtype)
        for i, r in enumerate(records):
            top, bottom = (camera_bands or {}).get(r.location_id, (band_top, band_bottom))
            img = preprocess_image(load_image(manifest.image_file(r)), top, bottom, image_side)
            images[i] = np.transpose(img, (2, 0, 1))
    return ArrayDataset(labels, images=images, metadata=metadata), names
