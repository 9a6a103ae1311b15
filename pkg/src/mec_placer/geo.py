"""Great-circle geometry and the immutable station topology.

Distances use the haversine formula on a spherical Earth (R = 6371 km). A
Topology caches everything downstream consumers need: the full distance
matrix, the within-threshold adjacency (self-adjacent by construction),
distance-sorted neighbor lists, per-station degree, and the mean distance
to each station's k nearest other stations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BaseStation, GeoPoint

EARTH_RADIUS_KM = 6371.0
# Assumed signal propagation speed. 9 km of one-way distance <-> 0.03 ms.
SIGNAL_SPEED_KM_PER_S = 3.0e5
_KM_PER_MS = SIGNAL_SPEED_KM_PER_S / 1000.0
DEFAULT_K_NEAREST = 15


class DuplicateId(ValueError):
    """Station ids are not unique."""


def haversine_km(p1: GeoPoint, p2: GeoPoint) -> float:
    """Great-circle distance in kilometers between two points."""
    lat1 = math.radians(p1.lat_deg)
    lat2 = math.radians(p2.lat_deg)
    dlat = math.radians(p2.lat_deg - p1.lat_deg)
    dlon = math.radians(p2.lon_deg - p1.lon_deg)
    a = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    c = 2.0 * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))
    return EARTH_RADIUS_KM * c


def delay_ms_from_km(distance_km: float) -> float:
    """One-way propagation delay in milliseconds for a distance in kilometers."""
    if distance_km < 0:
        raise ValueError(f"negative distance: {distance_km}")
    return distance_km / _KM_PER_MS


def _pairwise_km(lat_deg: np.ndarray, lon_deg: np.ndarray) -> np.ndarray:
    """Full n x n haversine matrix; same operation order as haversine_km."""
    lat = np.radians(lat_deg)
    dlat = np.radians(lat_deg[None, :] - lat_deg[:, None])
    dlon = np.radians(lon_deg[None, :] - lon_deg[:, None])
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2.0) ** 2
    c = 2.0 * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))
    return EARTH_RADIUS_KM * c


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable instance geometry plus workloads.

    neighbors[i] holds the ids within d_th_km of i sorted by ascending
    distance, i itself first; dof[i] excludes self; avg_dist_k[i] is the
    mean distance to the min(k_nearest, n - 1) nearest other stations.
    """

    n: int
    stations: tuple[BaseStation, ...]
    dist_km: np.ndarray
    adj: np.ndarray
    neighbors: tuple[np.ndarray, ...]
    dof: np.ndarray
    avg_dist_k: np.ndarray
    workloads: np.ndarray
    d_th_km: float
    k_nearest: int


def _assemble(stations: list[BaseStation], dist: np.ndarray, d_th_km: float, k_nearest: int) -> Topology:
    n = len(stations)
    adj = dist <= d_th_km
    neighbors = []
    for i in range(n):
        ids = np.flatnonzero(adj[i])
        # ascending distance, self first at distance zero, remaining ties by id
        order = np.lexsort((ids, ids != i, dist[i, ids]))
        nbr = ids[order].astype(np.int64)
        nbr.setflags(write=False)
        neighbors.append(nbr)
    dof = adj.sum(axis=1).astype(np.int64) - 1
    k_eff = min(k_nearest, n - 1)
    if k_eff <= 0:
        avg = np.zeros(n)
    else:
        srt = np.sort(dist, axis=1)
        avg = srt[:, 1 : k_eff + 1].mean(axis=1)
    workloads = np.array([s.workload for s in stations], dtype=np.float64)
    for arr in (dist, adj, dof, avg, workloads):
        arr.setflags(write=False)
    return Topology(
        n=n,
        stations=tuple(stations),
        dist_km=dist,
        adj=adj,
        neighbors=tuple(neighbors),
        dof=dof,
        avg_dist_k=avg,
        workloads=workloads,
        d_th_km=float(d_th_km),
        k_nearest=int(k_nearest),
    )


def _check_stations(stations: list[BaseStation]) -> None:
    if not stations:
        raise ValueError("no stations given")
    ids = [s.id for s in stations]
    if len(set(ids)) != len(ids):
        raise DuplicateId("station ids are not unique")
    if ids != list(range(len(ids))):
        raise ValueError("station ids must be dense and 0-based, in id order")


def build_topology(
    stations: list[BaseStation], d_th_km: float, k_nearest: int = DEFAULT_K_NEAREST
) -> Topology:
    """Compute the full topology for a station list at coverage threshold d_th_km."""
    _check_stations(stations)
    if d_th_km <= 0:
        raise ValueError(f"d_th_km must be positive, got {d_th_km}")
    if k_nearest < 1:
        raise ValueError(f"k_nearest must be >= 1, got {k_nearest}")
    lat = np.array([s.location.lat_deg for s in stations], dtype=np.float64)
    lon = np.array([s.location.lon_deg for s in stations], dtype=np.float64)
    dist = _pairwise_km(lat, lon)
    return _assemble(list(stations), dist, d_th_km, k_nearest)


def topology_from_matrix(
    dist_km: np.ndarray,
    d_th_km: float,
    workloads: np.ndarray | None = None,
    k_nearest: int = DEFAULT_K_NEAREST,
) -> Topology:
    """Build a Topology from an explicit distance matrix (for worked examples and tests).

    Stations get placeholder coordinates; only matrix-derived fields are meaningful.
    """
    dist = np.asarray(dist_km, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValueError("distance matrix must be square")
    n = dist.shape[0]
    if n < 1:
        raise ValueError("no stations given")
    if not np.allclose(dist, dist.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(dist) != 0.0):
        raise ValueError("distance matrix diagonal must be zero")
    if np.any(dist < 0):
        raise ValueError("distances must be non-negative")
    if d_th_km <= 0:
        raise ValueError(f"d_th_km must be positive, got {d_th_km}")
    if workloads is None:
        wl = [0.0] * n
    else:
        wl = [float(w) for w in workloads]
        if len(wl) != n:
            raise ValueError("workloads length must match matrix size")
    stations = [BaseStation(i, GeoPoint(0.0, 0.0), wl[i]) for i in range(n)]
    return _assemble(stations, dist.copy(), d_th_km, k_nearest)
