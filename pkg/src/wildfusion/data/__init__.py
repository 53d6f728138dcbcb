from .images import ImageError, load_image, preprocess_image, preprocess_image_file, save_image
from .records import Manifest, ManifestError, SampleRecord, compute_scene_stats, load_manifest, write_manifest
from .splits import Split, split_dataset, split_indices
from .weather import (
    FileWeatherSource,
    FrostWeatherSource,
    Station,
    WeatherReading,
    WeatherSource,
    WeatherSourceError,
    backfill_temperature,
    haversine_km,
    nearest_station,
)

__all__ = [
    "FileWeatherSource",
    "FrostWeatherSource",
    "ImageError",
    "Manifest",
    "ManifestError",
    "SampleRecord",
    "Split",
    "Station",
    "WeatherReading",
    "WeatherSource",
    "WeatherSourceError",
    "backfill_temperature",
    "compute_scene_stats",
    "haversine_km",
    "load_image",
    "load_manifest",
    "nearest_station",
    "preprocess_image",
    "preprocess_image_file",
    "save_image",
    "split_dataset",
    "split_indices",
    "write_manifest",
]
