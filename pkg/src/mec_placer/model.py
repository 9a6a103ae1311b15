"""Core records shared across the solver: coordinates, stations, placements."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate in decimal degrees."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon_deg}")


@dataclass(frozen=True)
class BaseStation:
    """A network node: dense 0-based id, location, and peak daily workload (requests/day)."""

    id: int
    location: GeoPoint
    workload: float

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"station id must be non-negative, got {self.id}")
        if self.workload < 0:
            raise ValueError(f"negative workload for station {self.id}")


@dataclass(frozen=True)
class Placement:
    """A complete solution: server set plus a total station-to-server assignment.

    ``assignment[i]`` is the station id serving station ``i``; servers serve
    themselves. ``d_th_km`` and ``capacity_max`` record the constraints the
    placement claims to satisfy.
    """

    es_set: frozenset[int]
    assignment: tuple[int, ...]
    d_th_km: float
    capacity_max: float

    @property
    def k(self) -> int:
        """Number of servers."""
        return len(self.es_set)


def make_placement(assignment: Iterable[int], d_th_km: float, capacity_max: float) -> Placement:
    """Build a Placement from a destination vector; servers are the assigned-to stations."""
    assign = tuple(int(a) for a in assignment)
    return Placement(
        es_set=frozenset(assign),
        assignment=assign,
        d_th_km=float(d_th_km),
        capacity_max=float(capacity_max),
    )
