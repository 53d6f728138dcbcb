"""Fixed-layout 538-dimensional metadata vectors.

Layout (half-open index ranges)::

    datetime            [0, 67)     month(12) + day(31) + hour(24) one-hot
    temperature         [67, 69)    (valid flag, normalized value)
    position            [69, 71)    (latitude, longitude), min-max normalized
    scene_attributes    [71, 173)   102 attribute scores
    scene_descriptors   [173, 538)  365 scene-category scores
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Optional

import numpy as np

N_MONTH, N_DAY, N_HOUR = 12, 31, 24
DATETIME_DIM = N_MONTH + N_DAY + N_HOUR
N_SCENE_ATTRIBUTES = 102
N_SCENE_DESCRIPTORS = 365

TEMPERATURE_RANGE = (-40.0, 40.0)
LATITUDE_RANGE = (58.0, 71.0)
LONGITUDE_RANGE = (4.0, 30.0)

SLICES = {
    "datetime": slice(0, 67),
    "temperature": slice(67, 69),
    "position": slice(69, 71),
    "scene_attributes": slice(71, 173),
    "scene_descriptors": slice(173, 538),
}
METADATA_DIM = 538


class FeatureGroup(enum.Enum):
    """Selectable metadata components.

    ``POSITION_TEMPERATURE`` is the merged "pos temp" group used by the
    four-way ablation; the five-way variant uses ``POSITION`` and
    ``TEMPERATURE`` separately.
    """

    DATETIME = "datetime"
    TEMPERATURE = "temperature"
    POSITION = "position"
    POSITION_TEMPERATURE = "pos_temp"
    SCENE_ATTRIBUTES = "scene_attributes"
    PLACES = "places"

    @property
    def span(self) -> tuple[int, int]:
        return _SPANS[self]

    @property
    def width(self) -> int:
        a, b = self.span
        return b - a

    @property
    def short(self) -> str:
        return _SHORT[self]


_SPANS = {
    FeatureGroup.DATETIME: (0, 67),
    FeatureGroup.TEMPERATURE: (67, 69),
    FeatureGroup.POSITION: (69, 71),
    FeatureGroup.POSITION_TEMPERATURE: (67, 71),
    FeatureGroup.SCENE_ATTRIBUTES: (71, 173),
    FeatureGroup.PLACES: (173, 538),
}
_SHORT = {
    FeatureGroup.DATETIME: "DT",
    FeatureGroup.TEMPERATURE: "T",
    FeatureGroup.POSITION: "P",
    FeatureGroup.POSITION_TEMPERATURE: "P&T",
    FeatureGroup.SCENE_ATTRIBUTES: "SA",
    FeatureGroup.PLACES: "PI",
}

FOUR_GROUPS = (
    FeatureGroup.DATETIME,
    FeatureGroup.POSITION_TEMPERATURE,
    FeatureGroup.SCENE_ATTRIBUTES,
    FeatureGroup.PLACES,
)
FIVE_GROUPS = (
    FeatureGroup.DATETIME,
    FeatureGroup.TEMPERATURE,
    FeatureGroup.POSITION,
    FeatureGroup.SCENE_ATTRIBUTES,
    FeatureGroup.PLACES,
)


def parse_group(name: str) -> FeatureGroup:
    key = name.strip().lower()
    for g in FeatureGroup:
        if key in (g.value, g.name.lower(), g.short.lower()):
            return g
    raise ValueError(f"unknown feature group {name!r}")


@dataclass(frozen=True)
class RawMetadata:
    timestamp: datetime
    temperature_celsius: Optional[float]
    latitude: float
    longitude: float
    scene_attributes: tuple
    scene_descriptors: tuple

    def __post_init__(self):
        if len(self.scene_attributes) != N_SCENE_ATTRIBUTES:
            raise ValueError(f"scene_attributes must have {N_SCENE_ATTRIBUTES} entries, got {len(self.scene_attributes)}")
        if len(self.scene_descriptors) != N_SCENE_DESCRIPTORS:
            raise ValueError(
                f"scene_descriptors must have {N_SCENE_DESCRIPTORS} entries, got {len(self.scene_descriptors)}"
            )


def encode_datetime(timestamp: datetime) -> np.ndarray:
    month, day, hour = timestamp.month, timestamp.day, timestamp.hour
    if not 1 <= month <= 12:
        raise ValueError(f"month {month} outside 1..12")
    if not 1 <= day <= 31:
        raise ValueError(f"day {day} outside 1..31")
    if not 0 <= hour <= 23:
        raise ValueError(f"hour {hour} outside 0..23")
    out = np.zeros(DATETIME_DIM)
    out[month - 1] = 1.0
    out[N_MONTH + day - 1] = 1.0
    out[N_MONTH + N_DAY + hour] = 1.0
    return out


def _minmax(value: float, lo: float, hi: float) -> float:
    return float(min(1.0, max(0.0, (value - lo) / (hi - lo))))


def encode_temperature(temperature_celsius: Optional[float]) -> np.ndarray:
    """``(1, scaled)`` for a reading, ``(0, 0)`` when there is none."""
    if temperature_celsius is None or not np.isfinite(temperature_celsius):
        return np.zeros(2)
    return np.array([1.0, _minmax(temperature_celsius, *TEMPERATURE_RANGE)])


def encode_position(latitude: float, longitude: float) -> np.ndarray:
    return np.array([_minmax(latitude, *LATITUDE_RANGE), _minmax(longitude, *LONGITUDE_RANGE)])


@dataclass
class SceneStats:
    """Dataset-wide per-dimension min/max for the scene vectors."""

    attr_min: np.ndarray
    attr_max: np.ndarray
    desc_min: np.ndarray
    desc_max: np.ndarray

    @classmethod
    def identity(cls) -> "SceneStats":
        return cls(
            np.zeros(N_SCENE_ATTRIBUTES),
            np.ones(N_SCENE_ATTRIBUTES),
            np.zeros(N_SCENE_DESCRIPTORS),
            np.ones(N_SCENE_DESCRIPTORS),
        )

    @classmethod
    def from_arrays(cls, attributes: np.ndarray, descriptors: np.ndarray) -> "SceneStats":
        attributes = np.asarray(attributes, dtype=float).reshape(-1, N_SCENE_ATTRIBUTES)
        descriptors = np.asarray(descriptors, dtype=float).reshape(-1, N_SCENE_DESCRIPTORS)
        return cls(attributes.min(0), attributes.max(0), descriptors.min(0), descriptors.max(0))

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("attr_min", "attr_max", "desc_min", "desc_max")}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneStats":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("attr_min", "attr_max", "desc_min", "desc_max")))


def _scale(values, lo, hi) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    span = hi - lo
    # Constant dimensions carry no information; map them to 0.
    out = np.divide(values - lo, span, out=np.zeros_like(values), where=span > 0)
    return np.clip(out, 0.0, 1.0)


class MetadataEncoder:
    """Assembles :class:`RawMetadata` into the 538-dim vector."""

    def __init__(self, stats: SceneStats | None = None):
        self.stats = stats or SceneStats.identity()

    def __call__(self, raw: RawMetadata) -> np.ndarray:
        return assemble_metadata(raw, self.stats)

    def encode_many(self, raws: Iterable[RawMetadata]) -> np.ndarray:
        rows = [assemble_metadata(r, self.stats) for r in raws]
        return np.stack(rows) if rows else np.zeros((0, METADATA_DIM))


def assemble_metadata(raw: RawMetadata, stats: SceneStats | None = None) -> np.ndarray:
    stats = stats or SceneStats.identity()
    if len(raw.scene_attributes) != N_SCENE_ATTRIBUTES or len(raw.scene_descriptors) != N_SCENE_DESCRIPTORS:
        raise ValueError("scene vectors have the wrong length")
    parts = [
        encode_datetime(raw.timestamp),
        encode_temperature(raw.temperature_celsius),
        encode_position(raw.latitude, raw.longitude),
        _scale(raw.scene_attributes, stats.attr_min, stats.attr_max),
        _scale(raw.scene_descriptors, stats.desc_min, stats.desc_max),
    ]
    vec = np.concatenate(parts)
    assert vec.shape == (METADATA_DIM,)
    return vec


def _group_order(groups: Iterable[FeatureGroup]) -> list[FeatureGroup]:
    groups = sorted(set(groups), key=lambda g: g.span)
    for a, b in zip(groups, groups[1:]):
        if b.span[0] < a.span[1]:
            raise ValueError(f"feature groups {a.name} and {b.name} overlap")
    return groups


def group_indices(groups: Iterable[FeatureGroup]) -> np.ndarray:
    """Column indices for ``groups`` in canonical layout order."""
    groups = _group_order(groups)
    if not groups:
        raise ValueError("at least one feature group is required")
    return np.concatenate([np.arange(*g.span) for g in groups])


def select_feature_groups(vector: np.ndarray, groups: Iterable[FeatureGroup]) -> np.ndarray:
    """Concatenate the selected slices; works on one vector or an N x 538 matrix."""
    return np.asarray(vector)[..., group_indices(groups)]
