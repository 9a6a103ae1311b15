"""Workload ingestion, instance filtering, and synthetic instance generation.

The on-disk formats are small CSVs:

* request records: header ``station_key,day,count,location`` where location
  is a single quoted field holding ``"lat lon"`` (space-separated degrees);
* station lists: header ``id,lat,lon,workload``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path

import numpy as np

from .geo import _pairwise_km
from .model import BaseStation, GeoPoint

DEFAULT_CAPACITY_MAX = 150.0
DEFAULT_OUTLIER_RADIUS_KM = 3.0
DEFAULT_MIN_NEIGHBORS = 5
# 0.3 x 0.3 degree box (roughly 33 x 28 km at this latitude).
DEFAULT_BBOX = (31.0, 121.3, 31.3, 121.6)
DEFAULT_WORKLOAD_RANGE = (20, 80)
DEFAULT_CLUSTER_COUNT = 5
LOCATION_TOLERANCE_DEG = 1e-9
# Blob spread as a fraction of the bbox span, and the separation the center
# sampler aims for so blobs stay distinct service areas.
BLOB_SPREAD_FRACTION = 0.002
CENTER_SEPARATION_KM = 12.0
_CENTER_ATTEMPTS = 200


class EmptyInput(ValueError):
    """No records or stations to work with."""


class AllFiltered(ValueError):
    """Preprocessing removed every station."""


class InconsistentLocation(ValueError):
    """One station key reported two different locations."""


class InvalidRange(ValueError):
    """Malformed workload range."""


@dataclass(frozen=True)
class RequestRecord:
    """One day's request count at one station."""

    station_key: str
    day: date
    count: int
    location: GeoPoint

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError(f"negative count for {self.station_key} on {self.day}")


def ingest_records(records: list[RequestRecord]) -> list[BaseStation]:
    """Aggregate raw records into stations.

    Stations are numbered densely in first-appearance order of their key.
    A station's workload is the maximum over days of its per-day request
    total (its busiest day), so capacity planning covers the peak.
    """
    if not records:
        raise EmptyInput("no request records")
    order: list[str] = []
    locations: dict[str, GeoPoint] = {}
    day_totals: dict[str, dict[date, int]] = {}
    for rec in records:
        key = rec.station_key
        seen = locations.get(key)
        if seen is None:
            order.append(key)
            locations[key] = rec.location
            day_totals[key] = {}
        elif (
            abs(seen.lat_deg - rec.location.lat_deg) > LOCATION_TOLERANCE_DEG
            or abs(seen.lon_deg - rec.location.lon_deg) > LOCATION_TOLERANCE_DEG
        ):
            raise InconsistentLocation(f"station {key!r} reported two locations")
        per_day = day_totals[key]
        per_day[rec.day] = per_day.get(rec.day, 0) + rec.count
    return [
        BaseStation(idx, locations[key], float(max(day_totals[key].values())))
        for idx, key in enumerate(order)
    ]


def preprocess(
    stations: list[BaseStation],
    capacity_max: float = DEFAULT_CAPACITY_MAX,
    outlier_radius_km: float = DEFAULT_OUTLIER_RADIUS_KM,
    min_neighbors: int = DEFAULT_MIN_NEIGHBORS,
) -> list[BaseStation]:
    """Drop unservable stations, then geographically isolated ones.

    Stations with workload above capacity_max can never be assigned anywhere
    and are removed first. Then any station with fewer than min_neighbors
    other stations within outlier_radius_km is removed, in a single pass:
    counts are taken against the workload-filtered set, and removals do not
    trigger re-evaluation. Survivors are re-indexed densely, order preserved.
    """
    if capacity_max <= 0:
        raise ValueError(f"capacity_max must be positive, got {capacity_max}")
    if outlier_radius_km <= 0:
        raise ValueError(f"outlier_radius_km must be positive, got {outlier_radius_km}")
    if min_neighbors < 0:
        raise ValueError(f"min_neighbors must be >= 0, got {min_neighbors}")
    if not stations:
        raise EmptyInput("no stations")
    kept = [s for s in stations if s.workload <= capacity_max]
    if not kept:
        raise AllFiltered("every station exceeds capacity_max")
    lat = np.array([s.location.lat_deg for s in kept])
    lon = np.array([s.location.lon_deg for s in kept])
    dist = _pairwise_km(lat, lon)
    counts = (dist <= outlier_radius_km).sum(axis=1) - 1
    survivors = [s for s, c in zip(kept, counts) if c >= min_neighbors]
    if not survivors:
        raise AllFiltered("every station is an outlier")
    return [replace(s, id=i) for i, s in enumerate(survivors)]


def synthesize(
    n: int,
    seed: int,
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX,
    workload_range: tuple[int, int] = DEFAULT_WORKLOAD_RANGE,
    cluster_count: int = DEFAULT_CLUSTER_COUNT,
) -> list[BaseStation]:
    """Generate a deterministic synthetic instance.

    Stations are drawn from cluster_count tight Gaussian blobs inside bbox
    (lat_min, lon_min, lat_max, lon_max), clipped back into the box;
    workloads are integers uniform in workload_range.  Blob centers are
    sampled uniformly, retrying up to a fixed number of times for a pairwise
    separation of CENTER_SEPARATION_KM and keeping the best spread found, so
    each blob reads as its own service area rather than one smear.
    """
    if n < 2:
        raise ValueError(f"need at least 2 stations, got {n}")
    lat_min, lon_min, lat_max, lon_max = (float(v) for v in bbox)
    if not (lat_min < lat_max and lon_min < lon_max):
        raise ValueError(f"degenerate bbox: {bbox}")
    lo, hi = workload_range
    if lo > hi or lo < 0:
        raise InvalidRange(f"bad workload range: {workload_range}")
    if cluster_count < 1:
        raise ValueError(f"cluster_count must be >= 1, got {cluster_count}")
    rng = np.random.default_rng(seed)
    lat_span = lat_max - lat_min
    lon_span = lon_max - lon_min
    centers_lat, centers_lon = _spread_centers(
        rng,
        cluster_count,
        (lat_min + 0.1 * lat_span, lat_max - 0.1 * lat_span),
        (lon_min + 0.1 * lon_span, lon_max - 0.1 * lon_span),
    )
    member = rng.integers(cluster_count, size=n)
    lat = centers_lat[member] + rng.normal(0.0, BLOB_SPREAD_FRACTION * lat_span, n)
    lon = centers_lon[member] + rng.normal(0.0, BLOB_SPREAD_FRACTION * lon_span, n)
    lat = np.clip(lat, lat_min, lat_max)
    lon = np.clip(lon, lon_min, lon_max)
    workloads = rng.integers(lo, hi + 1, size=n)
    return [
        BaseStation(i, GeoPoint(float(lat[i]), float(lon[i])), float(workloads[i]))
        for i in range(n)
    ]


def _spread_centers(
    rng: np.random.Generator,
    count: int,
    lat_range: tuple[float, float],
    lon_range: tuple[float, float],
) -> tuple[np.ndarray, np.ndarray]:
    """Sample blob centers, preferring a draw with pairwise separation.

    Draws up to _CENTER_ATTEMPTS candidate sets and returns the first whose
    minimum pairwise distance reaches CENTER_SEPARATION_KM, falling back to
    the widest-spread candidate seen.  Deterministic for a given generator
    state.
    """
    best_lat = best_lon = None
    best_sep = -1.0
    for _ in range(_CENTER_ATTEMPTS):
        cand_lat = rng.uniform(lat_range[0], lat_range[1], count)
        cand_lon = rng.uniform(lon_range[0], lon_range[1], count)
        if count == 1:
            return cand_lat, cand_lon
        dist = _pairwise_km(cand_lat, cand_lon)
        sep = float(dist[np.triu_indices(count, 1)].min())
        if sep > best_sep:
            best_lat, best_lon, best_sep = cand_lat, cand_lon, sep
        if sep >= CENTER_SEPARATION_KM:
            break
    return best_lat, best_lon


def read_request_records(path: str | Path) -> list[RequestRecord]:
    """Read request records from CSV (header station_key,day,count,location)."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInput(f"{path}: empty file")
        if [h.strip() for h in header] != ["station_key", "day", "count", "location"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                day = date.fromisoformat(row[1].strip())
                count = int(row[2])
                lat_s, lon_s = row[3].split()
                loc = GeoPoint(float(lat_s), float(lon_s))
                records.append(RequestRecord(row[0], day, count, loc))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from exc
    if not records:
        raise EmptyInput(f"{path}: no records")
    return records


def write_stations_csv(path: str | Path, stations: list[BaseStation]) -> None:
    """Write a station list as CSV (header id,lat,lon,workload), LF line endings."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("id,lat,lon,workload\n")
        for s in stations:
            fh.write(f"{s.id},{s.location.lat_deg!r},{s.location.lon_deg!r},{s.workload!r}\n")


def read_stations_csv(path: str | Path) -> list[BaseStation]:
    """Read a station list written by write_stations_csv."""
    stations = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInput(f"{path}: empty file")
        if [h.strip() for h in header] != ["id", "lat", "lon", "workload"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                stations.append(
                    BaseStation(int(row[0]), GeoPoint(float(row[1]), float(row[2])), float(row[3]))
                )
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed station: {exc}") from exc
    if not stations:
        raise EmptyInput(f"{path}: no stations")
    return stations
