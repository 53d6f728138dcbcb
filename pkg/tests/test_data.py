import json
import logging
from datetime import datetime, timedelta

import numpy as np
import pytest
from PIL import Image

from wildfusion.data import (
    FileWeatherSource,
    FrostWeatherSource,
    ImageError,
    ManifestError,
    SampleRecord,
    Station,
    WeatherReading,
    WeatherSource,
    WeatherSourceError,
    backfill_temperature,
    compute_scene_stats,
    haversine_km,
    load_image,
    load_manifest,
    nearest_station,
    preprocess_image,
    preprocess_image_file,
    save_image,
    split_dataset,
    split_indices,
    write_manifest,
)
from wildfusion.data.dataset import build_arrays, class_names
from wildfusion.synthetic import random_records, write_demo_manifest

T0 = datetime(2021, 7, 1, 12, 0)


def rec(temp=None, lat=63.0, lon=10.0, ts=T0, **kw):
    return SampleRecord("img/a.png", 6, 1, lat, lon, ts, temp, (0.5,) * 102, (0.1,) * 365, **kw)


# ---- manifest


def test_manifest_round_trip(tmp_path):
    records = random_records(np.random.default_rng(0), 20, species=[1, 6] * 10)
    path = tmp_path / "m.jsonl"
    write_manifest(path, records)
    m = load_manifest(path, known_species=[1, 6])
    assert m.records == records
    np.testing.assert_allclose(m.stats.attr_max, compute_scene_stats(records).attr_max)
    assert m.image_file(records[0]) == tmp_path / records[0].image_path


def test_manifest_rejects_short_scene_vector_naming_field(tmp_path):
    path = tmp_path / "m.jsonl"
    d = rec(temp=1.0).to_json()
    d["scene_attributes"] = d["scene_attributes"][:101]
    path.write_text(json.dumps(d) + "\n")
    with pytest.raises(ManifestError, match=r"m.jsonl:1: .*scene_attributes.*101"):
        load_manifest(path)


def test_manifest_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "m.jsonl"
    good = json.dumps(rec().to_json())
    path.write_text(good + "\n{not json\n")
    with pytest.raises(ManifestError, match=":2: invalid JSON"):
        load_manifest(path)
    d = rec().to_json()
    del d["timestamp"]
    path.write_text(good + "\n" + json.dumps(d) + "\n")
    with pytest.raises(ManifestError, match=r":2: missing field\(s\) \['timestamp'\]"):
        load_manifest(path)
    path.write_text(good + "\n")
    with pytest.raises(ManifestError, match="unknown species id 6"):
        load_manifest(path, known_species=[1])


def test_missing_or_nonfinite_temperature_is_none():
    d = rec().to_json()
    assert "temperature_celsius" not in d
    assert SampleRecord.from_json(d).temperature_celsius is None
    d["temperature_celsius"] = float("nan")
    assert SampleRecord.from_json(d).temperature_celsius is None


# ---- weather


def table(tmp_path, readings):
    path = tmp_path / "w.csv"
    FileWeatherSource.write(path, readings)
    return FileWeatherSource(path)


def test_backfill_within_window(tmp_path):
    src = table(tmp_path, [WeatherReading("SN1", 63.01, 10.0, T0 + timedelta(hours=3), -4.5)])
    assert backfill_temperature(rec(), src).temperature_celsius == -4.5


def test_backfill_outside_window_stays_missing(tmp_path):
    src = table(tmp_path, [WeatherReading("SN1", 63.01, 10.0, T0 + timedelta(hours=30), -4.5)])
    assert backfill_temperature(rec(), src).temperature_celsius is None


def test_equidistant_stations_pick_natural_first_id(tmp_path):
    readings = [
        WeatherReading("SN18700", 63.1, 10.0, T0, 1.0),
        WeatherReading("SN900", 62.9, 10.0, T0, 2.0),
    ]
    assert haversine_km(63.0, 10.0, 63.1, 10.0) == pytest.approx(haversine_km(63.0, 10.0, 62.9, 10.0))
    assert nearest_station([Station("SN18700", 63.1, 10.0), Station("SN900", 62.9, 10.0)], 63.0, 10.0).station_id == "SN900"
    assert backfill_temperature(rec(), table(tmp_path, readings)).temperature_celsius == 2.0


def test_equidistant_readings_pick_earlier(tmp_path):
    readings = [
        WeatherReading("SN1", 63.0, 10.0, T0 + timedelta(hours=2), 5.0),
        WeatherReading("SN1", 63.0, 10.0, T0 - timedelta(hours=2), 3.0),
    ]
    assert backfill_temperature(rec(), table(tmp_path, readings)).temperature_celsius == 3.0


def test_backfill_never_overwrites(tmp_path):
    src = table(tmp_path, [WeatherReading("SN1", 63.0, 10.0, T0, 9.0)])
    r = rec(temp=1.5)
    assert backfill_temperature(r, src) is r


def test_failing_source_leaves_record_and_logs(caplog):
    class Broken(WeatherSource):
        def stations(self):
            raise ConnectionError("down")

        def readings(self, station_id, start, end):
            return []

    r = rec()
    with caplog.at_level(logging.WARNING):
        assert backfill_temperature(r, Broken()) == r
    assert "down" in caplog.text


def test_haversine_known_distance():
    # One degree of latitude is about 111.2 km.
    assert haversine_km(60.0, 10.0, 61.0, 10.0) == pytest.approx(111.19, abs=0.05)


class FakeResponse:
    def __init__(self, status, payload=None):
        self.status_code, self.payload = status, payload

    def json(self):
        return self.payload

    def raise_for_status(self):
        if self.status_code >= 400:
            raise RuntimeError(f"HTTP {self.status_code}")


class FakeFrost:
    """Serves the Frost JSON shapes from an in-memory reading list."""

    def __init__(self, readings):
        self.readings = readings
        self.calls = []

    def get(self, url, params=None, auth=None, timeout=None):
        self.calls.append((url, params, auth))
        if url.endswith("/sources/v0.jsonld"):
            seen = {}
            for r in self.readings:
                seen.setdefault(r.station_id, {"id": r.station_id, "geometry": {"coordinates": [r.longitude, r.latitude]}})
            return FakeResponse(200, {"data": list(seen.values())})
        start, end = (datetime.strptime(s, "%Y-%m-%dT%H:%M:%SZ") for s in params["referencetime"].split("/"))
        data = [
            {"referenceTime": r.timestamp.strftime("%Y-%m-%dT%H:%M:%S.000Z"), "observations": [{"elementId": "air_temperature", "value": r.temperature_celsius}]}
            for r in self.readings
            if r.station_id == params["sources"] and start <= r.timestamp < end
        ]
        return FakeResponse(200, {"data": data}) if data else FakeResponse(404)


def test_frost_and_file_sources_agree(tmp_path):
    rng = np.random.default_rng(3)
    readings = []
    for s in range(6):
        lat, lon = float(rng.uniform(60, 66)), float(rng.uniform(6, 14))
        for h in range(0, 96, 5):
            readings.append(WeatherReading(f"SN{100 * (s + 1)}", lat, lon, T0 - timedelta(hours=48) + timedelta(hours=h), float(np.round(rng.normal(), 1))))
    file_src = table(tmp_path, readings)
    frost = FrostWeatherSource(client_id="abc", session=FakeFrost(readings))
    for i in range(25):
        r = rec(lat=float(rng.uniform(60, 66)), lon=float(rng.uniform(6, 14)), ts=T0 + timedelta(hours=float(rng.uniform(-30, 30))))
        assert backfill_temperature(r, file_src) == backfill_temperature(r, frost)
    url, params, auth = frost.session.calls[-1]
    assert url == "https://frost.met.no/observations/v0.jsonld" and auth == ("abc", "")


def test_frost_requires_client_id(monkeypatch):
    monkeypatch.delenv("FROST_CLIENT_ID", raising=False)
    frost = FrostWeatherSource(session=FakeFrost([]))
    with pytest.raises(WeatherSourceError, match="FROST_CLIENT_ID"):
        frost.stations()
    monkeypatch.setenv("FROST_CLIENT_ID", "me")
    assert FrostWeatherSource(session=FakeFrost([])).stations() == []


def test_weather_reading_rejects_nonfinite():
    with pytest.raises(ValueError):
        WeatherReading("SN1", 60.0, 10.0, T0, float("inf"))


# ---- images


def test_preprocess_strips_bands_and_resizes():
    img = np.zeros((1080, 1920, 3), dtype=np.uint8)
    img[:30] = 255
    img[-30:] = 255
    out = preprocess_image(img, band_top=30)
    assert out.shape == (512, 512, 3)
    assert out.max() == 0  # the bright bands are gone
    same = np.random.default_rng(0).random((64, 64, 3))
    np.testing.assert_array_equal(preprocess_image(same, target_side=64), same)
    with pytest.raises(ImageError, match="not larger"):
        preprocess_image(np.zeros((50, 50, 3)), band_top=25)


def test_image_io(tmp_path):
    img = np.random.default_rng(1).random((20, 30, 3))
    save_image(tmp_path / "a.png", img)
    back = load_image(tmp_path / "a.png")
    assert back.shape == (20, 30, 3) and np.abs(back - img).max() <= 1 / 255
    save_image(tmp_path / "a.npy", img)
    np.testing.assert_array_equal(load_image(tmp_path / "a.npy"), img)
    (tmp_path / "bad.jpg").write_bytes(b"not an image")
    with pytest.raises(ImageError, match="bad.jpg"):
        load_image(tmp_path / "bad.jpg")
    with pytest.raises(ImageError):
        preprocess_image_file(tmp_path / "bad.jpg")
    Image.fromarray(np.zeros((40, 40, 3), np.uint8)).save(tmp_path / "b.png")
    assert preprocess_image_file(tmp_path / "b.png", target_side=16).shape == (16, 16, 3)


# ---- splits


@pytest.mark.parametrize("counts", [[250, 250, 250, 250], [500, 37, 9, 3], [13, 11, 7]])
def test_split_sizes_and_stratification(counts):
    labels = np.repeat(np.arange(len(counts)), counts)
    tags = split_dataset(labels, seed=0)
    parts = split_indices(tags)
    n = len(labels)
    n_test = round(0.1 * n)
    assert len(parts["test"]) == n_test
    assert len(parts["validation"]) == round(0.1 * (n - n_test))
    assert sum(len(v) for v in parts.values()) == n
    for c, k in enumerate(counts):
        t = int(np.sum(labels[parts["test"]] == c))
        v = int(np.sum(labels[parts["validation"]] == c))
        assert abs(t - 0.1 * k) <= 1
        assert abs(v - 0.1 * (k - t)) <= 1


def test_split_deterministic_and_seeded():
    labels = np.repeat([0, 1], 50)
    assert np.array_equal(split_dataset(labels, 3), split_dataset(labels, 3))
    assert not np.array_equal(split_dataset(labels, 3), split_dataset(labels, 4))
    with pytest.raises(ValueError, match="at least 10"):
        split_dataset([0, 1, 0])


def test_split_warns_on_tiny_class(caplog):
    with caplog.at_level(logging.WARNING):
        split_dataset([0] * 20 + [1])
    assert "only 1 sample" in caplog.text


# ---- dataset assembly


def test_build_arrays_from_demo_manifest(tmp_path):
    path = write_demo_manifest(tmp_path, n=24, side=20)
    m = load_manifest(path)
    data, names = build_arrays(m, image_side=16)
    assert names == class_names(m.records) == sorted({r.class_label for r in m.records})
    assert data.images.shape == (24, 3, 16, 16) and data.metadata.shape == (24, 538)
    with pytest.raises(ValueError, match="not in the class list"):
        build_arrays(m, names=names[:1])


def test_per_camera_band_heights(tmp_path):
    path = write_demo_manifest(tmp_path, n=12, side=20)
    m = load_manifest(path)
    # Paint a bright top band on every image; only camera-specific settings strip it.
    for r in m.records:
        img = load_image(m.image_file(r))
        img[:4] = 1.0
        save_image(m.image_file(r), img)
    loc = m.records[0].location_id
    plain, _ = build_arrays(m, image_side=16)
    banded, _ = build_arrays(m, image_side=16, camera_bands={loc: [4, 0]})
    for i, r in enumerate(m.records):
        same = np.array_equal(plain.images[i], banded.images[i])
        assert same == (r.location_id != loc)
