"""Synthetic datasets with known answers, for desk-scale checks and demos."""

from __future__ import annotations

from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .data.images import save_image
from .data.records import SampleRecord, compute_scene_stats, write_manifest
from .metadata import LATITUDE_RANGE, LONGITUDE_RANGE, N_SCENE_ATTRIBUTES, N_SCENE_DESCRIPTORS, MetadataEncoder
from .training import ArrayDataset


def random_records(rng: np.random.Generator, n: int, months=None, attributes=None, species=None) -> list[SampleRecord]:
    """Plausible records; ``months`` (1..12) and ``attributes`` (n x 102) may be pinned."""
    out = []
    for i in range(n):
        month = int(months[i]) if months is not None else int(rng.integers(1, 13))
        day = int(rng.integers(1, 29))
        ts = datetime(2021, month, day, int(rng.integers(0, 24)), int(rng.integers(0, 60)))
        attrs = attributes[i] if attributes is not None else rng.random(N_SCENE_ATTRIBUTES)
        out.append(
            SampleRecord(
                image_path=f"img/{i:06d}.png",
                species_id=int(species[i]) if species is not None else 1,
                location_id=int(rng.integers(0, 50)),
                latitude=float(rng.uniform(*LATITUDE_RANGE)),
                longitude=float(rng.uniform(*LONGITUDE_RANGE)),
                timestamp=ts,
                temperature_celsius=float(rng.uniform(-20, 25)) if rng.random() < 0.9 else None,
                scene_attributes=tuple(float(v) for v in attrs),
                scene_descriptors=tuple(float(v) for v in rng.random(N_SCENE_DESCRIPTORS)),
            )
        )
    return out


def encode_records(records) -> np.ndarray:
    return MetadataEncoder(compute_scene_stats(records)).encode_many(r.raw_metadata() for r in records)


def noise_images(rng: np.random.Generator, n: int, side: int, dtype=np.float64) -> np.ndarray:
    return rng.random((n, 3, side, side)).astype(dtype)


def metadata_determined(n: int = 2000, num_classes: int = 4, side: int = 16, seed: int = 0, dtype=np.float64) -> ArrayDataset:
    """Class is a function of the capture month; images are pure noise."""
    if 12 % num_classes:
        raise ValueError("num_classes must divide 12")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    per = 12 // num_classes
    months = labels * per + 1 + rng.integers(0, per, size=n)
    meta = encode_records(random_records(rng, n, months=months))
    return ArrayDataset(labels, images=noise_images(rng, n, side, dtype), metadata=meta.astype(dtype))


def complementary(n: int = 1200, side: int = 16, seed: int = 0, image_noise: float = 0.5, dtype=np.float64) -> ArrayDataset:
    """Four classes: the image reveals ``class // 2``, the metadata reveals ``class % 2``.

    Group 0 images are brighter in the top half, group 1 in the bottom half.
    The metadata bit shows as first versus second half of the year, southern
    versus northern half of the latitude range, and mild versus cold readings.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 4
    rng.shuffle(labels)
    odd = labels % 2 == 1
    months = np.where(odd, rng.integers(7, 13, size=n), rng.integers(1, 7, size=n))
    records = random_records(rng, n, months=months)
    mid_lat = sum(LATITUDE_RANGE) / 2
    for i, r in enumerate(records):
        lat = rng.uniform(mid_lat, LATITUDE_RANGE[1]) if odd[i] else rng.uniform(LATITUDE_RANGE[0], mid_lat)
        temp = None if r.temperature_celsius is None else float(rng.uniform(-20, 0) if odd[i] else rng.uniform(5, 25))
        records[i] = r.with_(latitude=float(lat), temperature_celsius=temp)
    meta = encode_records(records)
    images = image_noise * rng.standard_normal((n, 3, side, side))
    half = side // 2
    top = labels // 2 == 0
    images[top, :, :half, :] += 1.0
    images[~top, :, half:, :] += 1.0
    return ArrayDataset(labels, images=images.astype(dtype), metadata=meta.astype(dtype))


def class_hierarchy(num_supergroups: int = 3, per_group: int = 2, samples_per_class: int = 400, seed: int = 0, spread: float = 0.12, sub_spread: float = 0.12, noise: float = 0.8):
    """Scene-attribute clusters: supergroup centers, subclass offsets, Gaussian noise.

    Returns ``(metadata, labels)`` with ``num_supergroups * per_group`` classes.
    """
    rng = np.random.default_rng(seed)
    k = num_supergroups * per_group
    centers = []
    for _ in range(num_supergroups):
        g = 0.5 + spread * rng.standard_normal(N_SCENE_ATTRIBUTES)
        centers += [g + sub_spread * rng.standard_normal(N_SCENE_ATTRIBUTES) for _ in range(per_group)]
    labels = np.repeat(np.arange(k), samples_per_class)
    attrs = np.stack([centers[c] for c in labels]) + noise * rng.standard_normal((len(labels), N_SCENE_ATTRIBUTES))
    meta = encode_records(random_records(rng, len(labels), attributes=attrs))
    return meta, labels


def write_demo_manifest(out_dir, n: int = 240, side: int = 32, seed: int = 0, species=(1, 6, 8, 29)) -> Path:
    """A small manifest with PNG images whose class shows in both month and tint."""
    out_dir = Path(out_dir)
    (out_dir / "img").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    k = len(species)
    cls = np.arange(n) % k
    rng.shuffle(cls)
    months = (cls * (12 // k) + 1 + rng.integers(0, 12 // k, size=n)).clip(1, 12)
    records = random_records(rng, n, months=months, species=[species[c] for c in cls])
    tints = np.linspace(0.2, 0.8, k)
    for i, r in enumerate(records):
        img = 0.5 * rng.random((side, side, 3))
        img[..., 0] += tints[cls[i]] * 0.5
        save_image(out_dir / r.image_path, np.clip(img, 0, 1))
    path = out_dir / "manifest.jsonl"
    write_manifest(path, records)
    return path


def write_station_table(path, records, offset_hours: float = 3.0, seed: int = 0) -> None:
    """Weather CSV with one station per record, 3 h from its capture time by default."""
    from .data.weather import FileWeatherSource, WeatherReading

    rng = np.random.default_rng(seed)
    readings = []
    for i, r in enumerate(records):
        readings.append(
            WeatherReading(
                f"SN{1000 + i}",
                r.latitude + 0.01,
                r.longitude,
                r.timestamp + timedelta(hours=offset_hours),
                float(np.round(rng.uniform(-15, 20), 1)),
            )
        )
    FileWeatherSource.write(path, readings)
