"""Species -> supergroup label maps.

Presets ship as plain text files (``<species id> -> <label>`` per line) under
``wildfusion/presets`` and can be copied and edited freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

PRESETS = ("mild-25", "aggressive-13", "ablation-14")
ABLATION_9 = ("Fox", "Deer", "Mustelidae", "Bird", "Lynx", "Cat", "Sheep", "Rodent", "Wolf")
AGGRESSIVE_13 = (
    "Roe Deer",
    "Mustelid",
    "Fox",
    "Capreolinae",
    "Lepus",
    "Deer",
    "Bird",
    "Rodent",
    "Feline",
    "Farm Animal",
    "Wolf",
    "Boar",
    "Bear",
)


class TaxonomyError(ValueError):
    pass


def parse_mapping(text: str, source: str = "<string>") -> dict[int, str]:
    mapping: dict[int, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "->" not in line:
            raise TaxonomyError(f"{source}:{lineno}: expected '<species id> -> <label>'")
        key, label = (part.strip() for part in line.split("->", 1))
        try:
            sid = int(key)
        except ValueError:
            raise TaxonomyError(f"{source}:{lineno}: species id {key!r} is not an integer") from None
        if not label:
            raise TaxonomyError(f"{source}:{lineno}: empty label")
        if sid in mapping:
            raise TaxonomyError(f"{source}:{lineno}: duplicate species id {sid}")
        mapping[sid] = label
    return mapping


def _preset_text(name: str) -> str:
    return resources.files("wildfusion.presets").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def species_catalogue() -> dict[int, str]:
    return parse_mapping(_preset_text("species"), "species.txt")


@dataclass(frozen=True)
class TaxonomyMap:
    """``mapping`` is ``None`` for the identity map, which leaves labels untouched."""

    mapping: dict | None
    name: str = "custom"

    @classmethod
    def identity(cls) -> "TaxonomyMap":
        return cls(None, "identity")

    @classmethod
    def preset(cls, name: str) -> "TaxonomyMap":
        if name == "identity":
            return cls.identity()
        if name not in PRESETS:
            raise TaxonomyError(f"unknown taxonomy preset {name!r}; choose from {', '.join(PRESETS)}")
        return cls(parse_mapping(_preset_text(name), f"{name}.txt"), name)

    @classmethod
    def from_file(cls, path) -> "TaxonomyMap":
        path = Path(path)
        return cls(parse_mapping(path.read_text(encoding="utf-8"), str(path)), path.stem)

    @classmethod
    def load(cls, name_or_path: str) -> "TaxonomyMap":
        if name_or_path in PRESETS or name_or_path == "identity":
            return cls.preset(name_or_path)
        return cls.from_file(name_or_path)

    @property
    def is_identity(self) -> bool:
        return self.mapping is None

    @property
    def labels(self) -> list[str]:
        if self.mapping is None:
            return []
        return sorted(set(self.mapping.values()))

    def label_for(self, species_id: int) -> str:
        try:
            return self.mapping[species_id]
        except KeyError:
            raise TaxonomyError(f"species id {species_id} has no mapping in taxonomy {self.name!r}") from None

    def __contains__(self, species_id) -> bool:
        return self.mapping is None or species_id in self.mapping

    def to_text(self) -> str:
        if self.mapping is None:
            return ""
        return "".join(f"{sid} -> {label}\n" for sid, label in sorted(self.mapping.items()))


def aggregate_classes(records: Iterable, taxonomy: TaxonomyMap) -> list:
    """Replace each record's label with its supergroup; count preserved, idempotent."""
    records = list(records)
    if taxonomy.is_identity:
        return records
    missing = sorted({r.species_id for r in records if r.species_id not in taxonomy})
    if missing:
        raise TaxonomyError(f"species ids without a mapping in {taxonomy.name!r}: {missing}")
    return [r.with_(label=taxonomy.label_for(r.species_id)) for r in records]
