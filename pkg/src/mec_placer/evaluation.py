"""Placement checking, scoring, and the small-instance exhaustive oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geo import Topology, delay_ms_from_km
from .mdp import HyperParams
from .model import Placement

SERVER_COST = 10.0  # flat cost per elected server in the combination cost
BRUTE_FORCE_MAX_N = 7

KIND_CAPACITY = "capacity"
KIND_DISTANCE = "distance"
KIND_COVERAGE = "coverage"
KIND_SELF = "self_assignment"


class InfeasiblePlacement(ValueError):
    """Asked to score a placement that breaks a constraint."""


class TooLarge(ValueError):
    """Instance too big for exhaustive search."""


@dataclass(frozen=True)
class Violation:
    """One broken constraint: what kind, which station/server, by how much."""

    kind: str
    subject: int
    magnitude: float


@dataclass(frozen=True)
class MetricsReport:
    """Quality summary of a feasible placement."""

    n: int
    k: int
    total_distance_km: float
    avg_delay_km: float
    avg_delay_ms: float
    combination_cost: float


def _violations(p: Placement, topo: Topology, d_th_km: float, capacity_max: float) -> list[Violation]:
    out: list[Violation] = []
    n = topo.n
    if len(p.assignment) != n:
        out.append(Violation(KIND_COVERAGE, -1, float(abs(len(p.assignment) - n))))
        return out
    for i, a in enumerate(p.assignment):
        if not 0 <= a < n or a not in p.es_set:
            out.append(Violation(KIND_COVERAGE, i, 1.0))
    for j in sorted(p.es_set):
        if not 0 <= j < n:
            out.append(Violation(KIND_COVERAGE, j, 1.0))
        elif p.assignment[j] != j:
            out.append(Violation(KIND_SELF, j, 1.0))
    if out:
        return out
    assign = np.asarray(p.assignment, dtype=np.int64)
    dists = topo.dist_km[np.arange(n), assign]
    for i in np.flatnonzero(dists > d_th_km):
        out.append(Violation(KIND_DISTANCE, int(i), float(dists[i] - d_th_km)))
    loads = np.bincount(assign, weights=topo.workloads, minlength=n)
    for j in np.flatnonzero(loads > capacity_max):
        out.append(Violation(KIND_CAPACITY, int(j), float(loads[j] - capacity_max)))
    return out


def feasibility_check(p: Placement, topo: Topology, hp: HyperParams) -> list[Violation]:
    """All constraint violations of p against hp's threshold and capacity.

    Empty list means feasible: every station has exactly one in-range
    destination, destinations are self-serving servers, and no server's
    summed load exceeds capacity.
    """
    return _violations(p, topo, hp.d_th_km, hp.capacity_max)


def metrics(p: Placement, topo: Topology) -> MetricsReport:
    """Score a feasible placement against its own recorded constraints."""
    viol = _violations(p, topo, p.d_th_km, p.capacity_max)
    if viol:
        raise InfeasiblePlacement(f"{len(viol)} violation(s), first: {viol[0]}")
    n = topo.n
    assign = np.asarray(p.assignment, dtype=np.int64)
    total = float(topo.dist_km[np.arange(n), assign].sum())
    k = len(p.es_set)
    avg = total / n
    return MetricsReport(
        n=n,
        k=k,
        total_distance_km=total,
        avg_delay_km=avg,
        avg_delay_ms=delay_ms_from_km(avg),
        combination_cost=total + SERVER_COST * k,
    )


def combination_cost(assign: np.ndarray, topo: Topology) -> float:
    """Total assignment distance plus SERVER_COST per distinct destination."""
    total = float(topo.dist_km[np.arange(topo.n), assign].sum())
    return total + SERVER_COST * len(np.unique(assign))


def brute_force_optimal(topo: Topology, hp: HyperParams) -> Placement:
    """Exhaustive minimum-combination-cost placement for tiny instances.

    Enumerates every destination vector with gene i among i's neighbors,
    decodes pointed-at stations as self-serving servers, filters by
    capacity (distance holds by construction), and keeps the cheapest;
    ties break by fewer servers, then lexicographic assignment.
    """
    n = topo.n
    if n > BRUTE_FORCE_MAX_N:
        raise TooLarge(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    delta = [float(w) for w in topo.workloads]
    cap = hp.capacity_max
    dist = topo.dist_km
    neighbor_lists = [tuple(int(j) for j in topo.neighbors[i]) for i in range(n)]
    best_key: tuple[float, int, tuple[int, ...]] | None = None
    for genes in itertools.product(*neighbor_lists):
        es = set(genes)
        assign = tuple(i if i in es else g for i, g in enumerate(genes))
        loads: dict[int, float] = dict.fromkeys(es, 0.0)
        for i, a in enumerate(assign):
            loads[a] += delta[i]
        if any(v > cap for v in loads.values()):
            continue
        cost = sum(float(dist[i, a]) for i, a in enumerate(assign)) + SERVER_COST * len(es)
        key = (cost, len(es), assign)
        if best_key is None or key < best_key:
            best_key = key
    if best_key is None:
        raise InfeasiblePlacement("no feasible placement exists for this instance")
    _, _, assign = best_key
    return Placement(
        es_set=frozenset(assign),
        assignment=assign,
        d_th_km=topo.d_th_km,
        capacity_max=float(cap),
    )
