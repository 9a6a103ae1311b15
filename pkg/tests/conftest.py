"""Shared fixtures: small hand-checkable topologies used across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from mec_placer import build_topology, synthesize, topology_from_matrix

# Five stations whose pairwise distances are easy to check by hand. At a
# 7 km threshold stations 0, 1, and 4 form a triangle, 2 hangs off 1, and
# 3 is isolated.
FIVE_STATION_DIST = np.array(
    [
        [0.0, 5.0, 8.0, 9.0, 4.0],
        [5.0, 0.0, 3.0, 17.0, 2.0],
        [8.0, 3.0, 0.0, 10.0, 14.0],
        [9.0, 17.0, 10.0, 0.0, 20.0],
        [4.0, 2.0, 14.0, 20.0, 0.0],
    ]
)
FIVE_STATION_ADJ = np.array(
    [
        [1, 1, 0, 0, 1],
        [1, 1, 1, 0, 1],
        [0, 1, 1, 0, 0],
        [0, 0, 0, 1, 0],
        [1, 1, 0, 0, 1],
    ],
    dtype=bool,
)
FIVE_STATION_WORKLOADS = (30.0, 20.0, 10.0, 40.0, 25.0)


@pytest.fixture
def five_station_distances() -> np.ndarray:
    return FIVE_STATION_DIST.copy()


@pytest.fixture
def five_station_adjacency() -> np.ndarray:
    return FIVE_STATION_ADJ.copy()


@pytest.fixture
def five_station_topology():
    return topology_from_matrix(
        FIVE_STATION_DIST, d_th_km=7.0, workloads=list(FIVE_STATION_WORKLOADS)
    )


@pytest.fixture(scope="session")
def clustered_topology():
    """100 synthetic stations at the default coverage threshold."""
    return build_topology(synthesize(100, seed=3), d_th_km=9.0)
