"""Run configuration: YAML file plus command-line overrides, strictly validated.

Schema (all keys optional unless a command needs them)::

    manifest: data/manifest.jsonl      # required by data commands
    taxonomy: identity                 # preset name or mapping file
    output_dir: runs/default
    epochs: 25
    batch_size: 64
    base_lr: 0.001
    lr_decay_factor: 0.1
    lr_decay_period: 7
    momentum: 0.0
    oversample: false
    augment: false
    split_seed: 0
    init_seed: 0
    augmentation_seed: 0
    band_top: 0
    band_bottom: null                  # null = same as band_top
    camera_bands: {}                   # location id -> [top, bottom]
    workers: null                      # null = all cores
    model: {...}                       # FusionModelConfig fields
    augmentation: {...}                # AugmentationConfig fields
    smote: {...}                       # SmoteConfig fields
    ablation: {...}                    # AblationSettings fields
    weather: {...}                     # WeatherSettings fields
"""

from __future__ import annotations

import difflib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .ablation import TrialConfig
from .augment import AugmentationConfig
from .models import FusionModelConfig
from .sampling import SmoteConfig


class ConfigError(ValueError):
    pass


_ALIASES = {
    "learningrate": "base_lr",
    "learning_rate": "base_lr",
    "lr": "base_lr",
    "batchsize": "batch_size",
    "num_epochs": "epochs",
    "output": "output_dir",
    "outdir": "output_dir",
    "seed": "split_seed",
}


def suggest_key(key: str, valid) -> str | None:
    valid = list(valid)
    alias = _ALIASES.get(key.lower().replace("-", "_"))
    if alias in valid:
        return alias
    close = difflib.get_close_matches(key, valid, n=1, cutoff=0.6)
    return close[0] if close else None


def _check_keys(section: str, data: dict, cls) -> None:
    valid = [f.name for f in fields(cls)]
    for key in data:
        if key not in valid:
            where = f"{section}.{key}" if section else key
            hint = suggest_key(key, valid)
            msg = f"unknown config key {where!r}"
            raise ConfigError(msg + (f"; did you mean {hint!r}?" if hint else ""))


@dataclass
class AblationSettings:
    classes: list | None = None  # None = every label in the data
    groups: str | list = "four"  # "four", "five" or explicit group names
    epochs: int = 15
    base_lr: float = 0.05
    momentum: float = 0.9
    lr_decay_period: int = 4
    full_sweep: bool = False
    max_trials: int = 10000  # larger sweeps need full_sweep

    def trial_config(self, batch_size: int, smote: SmoteConfig) -> TrialConfig:
        return TrialConfig(
            epochs=self.epochs,
            batch_size=batch_size,
            base_lr=self.base_lr,
            momentum=self.momentum,
            lr_decay_period=self.lr_decay_period,
            smote=smote,
        )


@dataclass
class WeatherSettings:
    source: str = "file"  # "file" or "frost"
    path: str | None = None
    endpoint: str = "https://frost.met.no"


@dataclass
class RunConfig:
    manifest: str | None = None
    taxonomy: str = "identity"
    output_dir: str = "runs/default"
    epochs: int = 25
    batch_size: int = 64
    base_lr: float = 1e-3
    lr_decay_factor: float = 0.1
    lr_decay_period: int = 7
    momentum: float = 0.0
    oversample: bool = False
    augment: bool = False
    split_seed: int = 0
    init_seed: int = 0
    augmentation_seed: int = 0
    band_top: int = 0
    band_bottom: int | None = None
    camera_bands: dict = field(default_factory=dict)
    workers: int | None = None
    model: dict = field(default_factory=dict)
    augmentation: dict = field(default_factory=dict)
    smote: dict = field(default_factory=dict)
    ablation: AblationSettings = field(default_factory=AblationSettings)
    weather: WeatherSettings = field(default_factory=WeatherSettings)

    def validate(self) -> "RunConfig":
        for name in ("epochs", "batch_size", "lr_decay_period"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)!r}")
        if not self.base_lr > 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr!r}")
        if not 0 < self.lr_decay_factor < 1:
            raise ConfigError(f"lr_decay_factor must be in (0, 1), got {self.lr_decay_factor!r}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum!r}")
        if self.band_top < 0 or (self.band_bottom is not None and self.band_bottom < 0):
            raise ConfigError("band heights must be non-negative")
        self.camera_bands = self.camera_bands_by_location()
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.manifest is not None and not Path(self.manifest).is_file():
            raise ConfigError(f"manifest {self.manifest!r} does not exist")
        _check_keys("model", self.model, FusionModelConfig)
        _check_keys("augmentation", self.augmentation, AugmentationConfig)
        _check_keys("smote", self.smote, SmoteConfig)
        if self.weather.source not in ("file", "frost"):
            raise ConfigError(f"weather.source must be 'file' or 'frost', got {self.weather.source!r}")
        try:
            self.smote_config()
            self.augmentation_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    def camera_bands_by_location(self) -> dict:
        out = {}
        for key, value in (self.camera_bands or {}).items():
            try:
                loc = int(key)
                top, bottom = (value, value) if isinstance(value, int) else (int(value[0]), int(value[1]))
            except (TypeError, ValueError, IndexError):
                raise ConfigError(f"camera_bands[{key!r}] must be a height or [top, bottom], got {value!r}") from None
            if top < 0 or bottom < 0:
                raise ConfigError(f"camera_bands[{key!r}]: band heights must be non-negative")
            out[loc] = [top, bottom]
        return out

    def require_manifest(self) -> Path:
        if self.manifest is None:
            raise ConfigError("missing required field 'manifest'")
        return Path(self.manifest)

    def model_config(self, num_classes: int | None = None) -> FusionModelConfig:
        d = dict(self.model)
        if num_classes is not None:
            given = d.get("num_classes")
            if given is not None and given != num_classes:
                raise ConfigError(f"model.num_classes={given} but the data has {num_classes} classes")
            d["num_classes"] = num_classes
            if d.get("late_head_widths") is None:
                d.pop("late_head_widths", None)
        try:
            return FusionModelConfig.from_dict(d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from None

    def smote_config(self) -> SmoteConfig:
        return SmoteConfig(**self.smote)

    def augmentation_config(self) -> AugmentationConfig:
        d = dict(self.augmentation)
        if "rotation_range_degrees" in d:
            d["rotation_range_degrees"] = tuple(d["rotation_range_degrees"])
        d.setdefault("seed", self.augmentation_seed)
        return AugmentationConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce(cls, name: str, value):
    """Cast ``value`` to the declared scalar type of field ``name``."""
    default = next(f for f in fields(cls) if f.name == name)
    kind = default.type if isinstance(default.type, str) else getattr(default.type, "__name__", "")
    if value is None:
        return None
    try:
        if kind.startswith("int"):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind.startswith("float"):
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind.startswith("bool"):
            if isinstance(value, str):
                if value.lower() in ("true", "yes", "1"):
                    return True
                if value.lower() in ("false", "no", "0"):
                    return False
                raise ValueError
            return bool(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {name!r}: {value!r}") from None
    return value


def _build(cls, data: dict, section: str = ""):
    _check_keys(section, data, cls)
    kwargs = {}
    for key, value in data.items():
        if key in ("ablation", "weather") and cls is RunConfig:
            sub = AblationSettings if key == "ablation" else WeatherSettings
            if not isinstance(value, dict):
                raise ConfigError(f"{key!r} must be a mapping")
            kwargs[key] = _build(sub, value, key)
        elif key in ("model", "augmentation", "smote", "camera_bands") and cls is RunConfig:
            if not isinstance(value, dict):
                raise ConfigError(f"{key!r} must be a mapping")
            kwargs[key] = dict(value)
        else:
            kwargs[key] = _coerce(cls, key, value)
    return cls(**kwargs)


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load ``path`` (YAML) if given, apply ``overrides`` (flags win), validate."""
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} does not exist")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: cannot parse YAML ({exc})") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data = loaded
    cfg = _build(RunConfig, data)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, sub = key.split(".", 1)
            target = getattr(cfg, section)
            if isinstance(target, dict):
                target[sub] = value
            else:
                _check_keys(section, {sub: value}, type(target))
                setattr(cfg, section, replace(target, **{sub: _coerce(type(target), sub, value)}))
        else:
            _check_keys("", {key: value}, RunConfig)
            setattr(cfg, key, _coerce(RunConfig, key, value))
    return cfg.validate()


def dump_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")
