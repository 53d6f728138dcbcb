"""Sample records and the line-delimited JSON manifest.

A manifest is a text file whose first line is a header object::

    {"format": "wildfusion-manifest", "version": 1, "scene_stats": {...}}

and every following non-blank line is one record::

    {"image_path": "img/0001.png", "species_id": 1, "location_id": 7,
     "latitude": 63.4, "longitude": 10.4, "timestamp": "2021-03-15T07:12:00",
     "temperature_celsius": -2.5,            # optional; null or absent = missing
     "scene_attributes": [... 102 numbers ...],
     "scene_descriptors": [... 365 numbers ...],
     "label": "Roe Deer"}                    # optional supergroup label

Image paths are resolved relative to the manifest's directory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..metadata import N_SCENE_ATTRIBUTES, N_SCENE_DESCRIPTORS, RawMetadata, SceneStats

MANIFEST_FORMAT = "wildfusion-manifest"
MANIFEST_VERSION = 1


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    species_id: int
    location_id: int
    latitude: float
    longitude: float
    timestamp: datetime
    temperature_celsius: Optional[float]
    scene_attributes: tuple
    scene_descriptors: tuple
    label: Optional[str] = None

    def __post_init__(self):
        if len(self.scene_attributes) != N_SCENE_ATTRIBUTES:
            raise ValueError(f"scene_attributes: expected {N_SCENE_ATTRIBUTES} values, got {len(self.scene_attributes)}")
        if len(self.scene_descriptors) != N_SCENE_DESCRIPTORS:
            raise ValueError(
                f"scene_descriptors: expected {N_SCENE_DESCRIPTORS} values, got {len(self.scene_descriptors)}"
            )

    @property
    def class_label(self) -> str:
        return self.label if self.label is not None else str(self.species_id)

    def raw_metadata(self) -> RawMetadata:
        return RawMetadata(
            timestamp=self.timestamp,
            temperature_celsius=self.temperature_celsius,
            latitude=self.latitude,
            longitude=self.longitude,
            scene_attributes=self.scene_attributes,
            scene_descriptors=self.scene_descriptors,
        )

    def with_(self, **changes) -> "SampleRecord":
        return replace(self, **changes)

    def to_json(self) -> dict:
        d = {
            "image_path": self.image_path,
            "species_id": self.species_id,
            "location_id": self.location_id,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "timestamp": self.timestamp.isoformat(),
            "scene_attributes": list(self.scene_attributes),
            "scene_descriptors": list(self.scene_descriptors),
        }
        if self.temperature_celsius is not None:
            d["temperature_celsius"] = self.temperature_celsius
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SampleRecord":
        required = ("image_path", "species_id", "location_id", "latitude", "longitude", "timestamp")
        missing = [k for k in required + ("scene_attributes", "scene_descriptors") if k not in d]
        if missing:
            raise ValueError(f"missing field(s) {missing}")
        temp = d.get("temperature_celsius")
        if temp is not None:
            temp = float(temp)
            if not math.isfinite(temp):
                temp = None
        return cls(
            image_path=str(d["image_path"]),
            species_id=int(d["species_id"]),
            location_id=int(d["location_id"]),
            latitude=float(d["latitude"]),
            longitude=float(d["longitude"]),
            timestamp=datetime.fromisoformat(d["timestamp"]),
            temperature_celsius=temp,
            scene_attributes=tuple(float(v) for v in d["scene_attributes"]),
            scene_descriptors=tuple(float(v) for v in d["scene_descriptors"]),
            label=d.get("label"),
        )


@dataclass
class Manifest:
    records: list
    stats: SceneStats
    root: Path = field(default_factory=Path)

    def image_file(self, record: SampleRecord) -> Path:
        p = Path(record.image_path)
        return p if p.is_absolute() else self.root / p


def compute_scene_stats(records: Iterable[SampleRecord]) -> SceneStats:
    records = list(records)
    if not records:
        return SceneStats.identity()
    attrs = np.array([r.scene_attributes for r in records], dtype=float)
    descs = np.array([r.scene_descriptors for r in records], dtype=float)
    return SceneStats.from_arrays(attrs, descs)


def load_manifest(path, known_species: Iterable[int] | None = None) -> Manifest:
    """Parse and validate a manifest; scene min/max comes from the header or the records."""
    path = Path(path)
    known = set(known_species) if known_species is not None else None
    records: list[SampleRecord] = []
    header: dict | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if header is None and isinstance(obj, dict) and obj.get("format") == MANIFEST_FORMAT:
                if obj.get("version") != MANIFEST_VERSION:
                    raise ManifestError(f"{path}:{lineno}: unsupported manifest version {obj.get('version')}")
                header = obj
                continue
            try:
                rec = SampleRecord.from_json(obj)
            except (ValueError, TypeError, KeyError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
            if known is not None and rec.species_id not in known:
                raise ManifestError(f"{path}:{lineno}: unknown species id {rec.species_id}")
            records.append(rec)
    if header and header.get("scene_stats"):
        stats = SceneStats.from_dict(header["scene_stats"])
    else:
        stats = compute_scene_stats(records)
    return Manifest(records=records, stats=stats, root=path.parent)


def write_manifest(path, records: Iterable[SampleRecord], stats: SceneStats | None = None) -> None:
    records = list(records)
    stats = stats or compute_scene_stats(records)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION, "scene_stats": stats.to_dict()}
        fh.write(json.dumps(header) + "\n")
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")
