"""Temperature backfill from the nearest weather station.

Rule: take the geographically nearest station (great-circle distance, ties to
the lower station id); if it has readings within +-24 h of the capture time,
use the temporally closest one.  Otherwise the temperature stays missing.
"""

from __future__ import annotations

import abc
import csv
import logging
import math
import os
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .records import SampleRecord

log = logging.getLogger(__name__)

WINDOW = timedelta(hours=24)
EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class Station:
    station_id: str
    latitude: float
    longitude: float


@dataclass(frozen=True)
class WeatherReading:
    station_id: str
    latitude: float
    longitude: float
    timestamp: datetime
    temperature_celsius: float

    def __post_init__(self):
        if not math.isfinite(self.temperature_celsius):
            raise ValueError(f"non-finite temperature at station {self.station_id}")


class WeatherSourceError(RuntimeError):
    pass


class WeatherSource(abc.ABC):
    """Station catalogue plus time-windowed temperature readings."""

    @abc.abstractmethod
    def stations(self) -> list[Station]: ...

    @abc.abstractmethod
    def readings(self, station_id: str, start: datetime, end: datetime) -> list[WeatherReading]: ...


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def _id_key(station_id: str):
    # "SN900" sorts before "SN18700": compare embedded numbers numerically.
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", station_id)]


def nearest_station(stations: list[Station], latitude: float, longitude: float) -> Station | None:
    if not stations:
        return None
    return min(stations, key=lambda s: (haversine_km(latitude, longitude, s.latitude, s.longitude), _id_key(s.station_id)))


def backfill_temperature(record: SampleRecord, source: WeatherSource, window: timedelta = WINDOW) -> SampleRecord:
    """Fill a missing temperature from the nearest station; best effort, never overwrites."""
    if record.temperature_celsius is not None:
        return record
    try:
        station = nearest_station(source.stations(), record.latitude, record.longitude)
        if station is None:
            return record
        readings = source.readings(station.station_id, record.timestamp - window, record.timestamp + window)
    except Exception as exc:  # backfill is best effort
        log.warning("weather source failed for %s: %s", record.image_path, exc)
        return record
    in_window = [r for r in readings if abs(r.timestamp - record.timestamp) <= window]
    if not in_window:
        return record
    best = min(in_window, key=lambda r: (abs(r.timestamp - record.timestamp), r.timestamp))
    return record.with_(temperature_celsius=float(best.temperature_celsius))


class FileWeatherSource(WeatherSource):
    """Station table from a CSV with columns
    ``station_id,latitude,longitude,timestamp,temperature_celsius``."""

    def __init__(self, path):
        self.path = Path(path)
        self._readings: dict[str, list[WeatherReading]] = {}
        self._stations: dict[str, Station] = {}
        with open(self.path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                r = WeatherReading(
                    station_id=row["station_id"],
                    latitude=float(row["latitude"]),
                    longitude=float(row["longitude"]),
                    timestamp=_naive_utc(datetime.fromisoformat(row["timestamp"].replace("Z", "+00:00"))),
                    temperature_celsius=float(row["temperature_celsius"]),
                )
                self._readings.setdefault(r.station_id, []).append(r)
                self._stations.setdefault(r.station_id, Station(r.station_id, r.latitude, r.longitude))

    def stations(self) -> list[Station]:
        return list(self._stations.values())

    def readings(self, station_id, start, end) -> list[WeatherReading]:
        return [r for r in self._readings.get(station_id, []) if start <= r.timestamp <= end]

    @staticmethod
    def write(path, readings) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["station_id", "latitude", "longitude", "timestamp", "temperature_celsius"])
            for r in readings:
                w.writerow([r.station_id, r.latitude, r.longitude, r.timestamp.isoformat(), r.temperature_celsius])


def _naive_utc(ts: datetime) -> datetime:
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts


class FrostWeatherSource(WeatherSource):
    """Client for a Frost-style observations service.

    Credentials: the client id is read from ``$FROST_CLIENT_ID`` and sent as the
    HTTP basic-auth user name.  ``session`` may be any object with a
    ``requests``-compatible ``get``.
    """

    def __init__(self, endpoint: str = "https://frost.met.no", client_id: str | None = None, session=None, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.client_id = client_id if client_id is not None else os.environ.get("FROST_CLIENT_ID")
        if session is None:
            import requests

            session = requests.Session()
        self.session = session
        self.timeout = timeout
        self._stations: list[Station] | None = None

    def _get(self, path: str, params: dict) -> dict | None:
        if not self.client_id:
            raise WeatherSourceError("FROST_CLIENT_ID is not set")
        resp = self.session.get(f"{self.endpoint}{path}", params=params, auth=(self.client_id, ""), timeout=self.timeout)
        if resp.status_code == 404:  # the service answers 404 for "no data"
            return None
        resp.raise_for_status()
        return resp.json()

    def stations(self) -> list[Station]:
        if self._stations is None:
            payload = self._get(
                "/sources/v0.jsonld",
                {"types": "SensorSystem", "elements": "air_temperature", "fields": "id,geometry"},
            ) or {"data": []}
            out = []
            for item in payload.get("data", []):
                geom = item.get("geometry") or {}
                coords = geom.get("coordinates")
                if not coords:
                    continue
                out.append(Station(str(item["id"]), float(coords[1]), float(coords[0])))
            self._stations = out
        return self._stations

    def readings(self, station_id, start, end) -> list[WeatherReading]:
        station = next((s for s in self.stations() if s.station_id == station_id), None)
        if station is None:
            return []
        fmt = "%Y-%m-%dT%H:%M:%SZ"
        payload = self._get(
            "/observations/v0.jsonld",
            {
                "sources": station_id,
                "referencetime": f"{start.strftime(fmt)}/{end.strftime(fmt)}",
                "elements": "air_temperature",
            },
        )
        if payload is None:
            return []
        out = []
        for item in payload.get("data", []):
            ts = _naive_utc(datetime.fromisoformat(item["referenceTime"].replace("Z", "+00:00")))
            for obs in item.get("observations", []):
                if obs.get("elementId") == "air_temperature" and obs.get("value") is not None:
                    out.append(WeatherReading(station_id, station.latitude, station.longitude, ts, float(obs["value"])))
        # The query interval is half-open on the service side; keep the closed window here.
        return [r for r in out if start <= r.timestamp <= end]
