"""Episode environment for sequential server election.

One episode walks the stations in index order. Each station either offloads
to an in-range server with spare capacity, elects a new server (possibly
itself), or, when it was already elected by an earlier station, is forced
to serve itself. Choosing a destination costs its distance, a flat
surcharge when the choice creates a new server, and the inverse of the
destination's priority.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import Topology

PRIORITY_FLOOR = 1e-9
INVERSE_PRIORITY_CLAMP = 1e9
NEW_SERVER_SURCHARGE_OFFSET = 1.0  # default fixed_value = d_th_km + this

_EMPTY = np.empty(0, dtype=np.int64)
_EMPTY.setflags(write=False)


class NotANeighbor(ValueError):
    """The requested action is outside the station's coverage range."""


class NoFeasibleAction(RuntimeError):
    """The station's own workload exceeds server capacity; nothing can host it."""


@dataclass(frozen=True)
class HyperParams:
    """Training and constraint knobs shared across agents and baselines.

    fixed_value, the new-server surcharge, defaults to d_th_km + 1 so that
    creating a server is never cheaper than any in-range assignment.
    """

    alpha: float = 0.4
    gamma: float = 0.9
    lam: float = 0.0
    episodes: int = 2000
    d_th_km: float = 9.0
    capacity_max: float = 150.0
    fixed_value: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")
        if self.d_th_km <= 0:
            raise ValueError(f"d_th_km must be positive, got {self.d_th_km}")
        if self.capacity_max <= 0:
            raise ValueError(f"capacity_max must be positive, got {self.capacity_max}")
        if self.fixed_value is None:
            object.__setattr__(self, "fixed_value", self.d_th_km + NEW_SERVER_SURCHARGE_OFFSET)
        if self.fixed_value <= self.d_th_km:
            raise ValueError(
                f"fixed_value must exceed d_th_km ({self.d_th_km}), got {self.fixed_value}"
            )


def epsilon(t: int) -> float:
    """Exploration rate for 0-based episode index t, decaying as 9 / (t + 100)."""
    if t < 0:
        raise ValueError(f"episode index must be >= 0, got {t}")
    return min(1.0, 9.0 / (t + 100.0))


def priority(i: int, topo: Topology) -> float:
    """Station attractiveness as a server: (workload + degree) / mean distance to k nearest."""
    avg = float(topo.avg_dist_k[i])
    num = float(topo.workloads[i]) + float(topo.dof[i])
    if avg <= 0.0:
        return math.inf if num > 0.0 else 0.0
    return num / avg


def priority_vector(topo: Topology) -> np.ndarray:
    """priority() for every station."""
    return np.array([priority(i, topo) for i in range(topo.n)], dtype=np.float64)


def inverse_priority(pr: float) -> float:
    """1/priority with near-zero priorities clamped to a large finite cost."""
    return INVERSE_PRIORITY_CLAMP if pr < PRIORITY_FLOOR else 1.0 / pr


class EpisodeContext:
    """Mutable state of one pass over the stations.

    es_order lists elected servers in election order; wl holds each
    server's reserved load, which includes the server's own workload from
    the moment of election (so a later forced self-visit adds nothing);
    forb marks stations that already offloaded elsewhere and can no longer
    be elected; assign maps visited stations to their destination (-1 while
    unvisited).
    """

    __slots__ = ("n", "capacity_max", "es_order", "es_mask", "wl", "forb", "assign")

    def __init__(self, n: int, capacity_max: float):
        self.n = n
        self.capacity_max = float(capacity_max)
        self.es_order: list[int] = []
        self.es_mask = np.zeros(n, dtype=bool)
        self.wl = np.zeros(n, dtype=np.float64)
        self.forb = np.zeros(n, dtype=bool)
        self.assign = np.full(n, -1, dtype=np.int64)

    # Dict/set views used by tests and reporting; the arrays above are the
    # working representation.
    @property
    def es_list(self) -> list[int]:
        return list(self.es_order)

    @property
    def wl_map(self) -> dict[int, float]:
        return {j: float(self.wl[j]) for j in self.es_order}

    @property
    def forbidden(self) -> set[int]:
        return {int(j) for j in np.flatnonzero(self.forb)}

    @property
    def assignment(self) -> dict[int, int]:
        return {int(i): int(a) for i, a in enumerate(self.assign) if a >= 0}


def feasible_actions(i: int, ctx: EpisodeContext, topo: Topology) -> tuple[np.ndarray, np.ndarray]:
    """Split station i's choices into (pa, nei).

    pa: existing servers in range with spare capacity for i's workload, in
    election order. nei: i's neighbors, distance-sorted, minus forbidden
    stations and minus any choice that would break the capacity bound
    (electing j reserves i's and j's workloads together; adding to an
    existing server must fit its remaining capacity). i itself stays in nei
    as the last resort whenever its own workload fits a server.
    """
    delta = topo.workloads
    di = float(delta[i])
    if di > ctx.capacity_max:
        raise NoFeasibleAction(f"station {i} workload {di} exceeds capacity {ctx.capacity_max}")
    cand = topo.neighbors[i]
    is_es = ctx.es_mask[cand]
    load_if_new = di + np.where(cand == i, 0.0, delta[cand])
    cap_ok = np.where(is_es, ctx.wl[cand] + di <= ctx.capacity_max, load_if_new <= ctx.capacity_max)
    nei = cand[~ctx.forb[cand] & cap_ok]
    if ctx.es_order:
        es = np.array(ctx.es_order, dtype=np.int64)
        pa = es[(topo.dist_km[i, es] <= topo.d_th_km) & (ctx.wl[es] + di <= ctx.capacity_max)]
    else:
        pa = _EMPTY
    return pa, nei


def penalty(i: int, a: int, ctx: EpisodeContext, topo: Topology, hp: HyperParams) -> float:
    """Cost of station i choosing destination a in the current context.

    distance + fixed_value when a is not yet a server + 1/priority(a).
    """
    if not topo.adj[i, a]:
        raise NotANeighbor(f"station {a} is not within range of station {i}")
    z = 0.0 if ctx.es_mask[a] else 1.0
    return float(topo.dist_km[i, a] + hp.fixed_value * z + inverse_priority(priority(a, topo)))


def apply_action(ctx: EpisodeContext, i: int, a: int, delta: np.ndarray) -> None:
    """Commit station i's choice of destination a.

    Electing an unvisited station j reserves delta[i] + delta[j] on j
    immediately, so j's later forced self-visit adds nothing. Offloading
    (a != i) bars i from ever becoming a server this episode.
    """
    di = float(delta[i])
    if ctx.es_mask[a]:
        if a != i:
            ctx.wl[a] += di
        # a == i: forced self-visit; own load was reserved at election
    else:
        ctx.es_mask[a] = True
        ctx.es_order.append(int(a))
        pending = float(delta[a]) if (a != i and ctx.assign[a] < 0) else 0.0
        ctx.wl[a] = di + pending
    if a != i:
        ctx.forb[i] = True
    ctx.assign[i] = a
    assert ctx.wl[a] <= ctx.capacity_max, (
        f"server {a} over capacity: {ctx.wl[a]} > {ctx.capacity_max}"
    )
