"""Heuristic placement baselines.

All baselines emit the same Placement shape as the trained agents and are
deterministic given their seed. Cluster heads always serve themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evaluation import SERVER_COST
from .geo import EARTH_RADIUS_KM, Topology
from .mdp import HyperParams
from .model import Placement, make_placement

RULE_TOP_WORKLOAD = "topk"
RULE_TOP_DOF = "topdof"
RULE_RANDOM = "random"
HEAD_RULES = (RULE_TOP_WORKLOAD, RULE_TOP_DOF, RULE_RANDOM)

KMEANS_MAX_ITER = 100


def _fill_from_head(
    head: int,
    assign: np.ndarray,
    unassigned: np.ndarray,
    topo: Topology,
    capacity_max: float,
    members: np.ndarray | None = None,
) -> None:
    """Assign the head's unassigned neighbors in ascending-distance order,
    stopping at the first one that would push the head over capacity."""
    delta = topo.workloads
    assign[head] = head
    unassigned[head] = False
    load = float(delta[head])
    for j in topo.neighbors[head][1:]:
        if not unassigned[j]:
            continue
        if members is not None and not members[j]:
            continue
        if load + float(delta[j]) > capacity_max:
            break
        assign[j] = head
        unassigned[j] = False
        load += float(delta[j])


def head_cluster(topo: Topology, hp: HyperParams, rule: str, seed: int = 0) -> Placement:
    """Iteratively elect a head among unassigned stations and fill its cluster.

    rule picks the head: "topk" takes the highest workload, "topdof" the
    highest degree, "random" a uniform draw; non-random ties break by
    smallest id.
    """
    if rule not in HEAD_RULES:
        raise ValueError(f"unknown head rule: {rule!r}")
    n = topo.n
    rng = np.random.default_rng(seed) if rule == RULE_RANDOM else None
    key = topo.workloads if rule == RULE_TOP_WORKLOAD else topo.dof.astype(np.float64)
    assign = np.full(n, -1, dtype=np.int64)
    unassigned = np.ones(n, dtype=bool)
    while unassigned.any():
        cand = np.flatnonzero(unassigned)
        if rule == RULE_RANDOM:
            head = int(cand[rng.integers(cand.size)])
        else:
            head = int(cand[np.lexsort((cand, -key[cand]))[0]])
        _fill_from_head(head, assign, unassigned, topo, hp.capacity_max)
    return make_placement(assign, topo.d_th_km, hp.capacity_max)


def _cross_km(
    lat_deg: np.ndarray, lon_deg: np.ndarray, clat_deg: np.ndarray, clon_deg: np.ndarray
) -> np.ndarray:
    """Haversine distances (points x centers)."""
    lat = np.radians(lat_deg)[:, None]
    clat = np.radians(clat_deg)[None, :]
    dlat = clat - lat
    dlon = np.radians(clon_deg)[None, :] - np.radians(lon_deg)[:, None]
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat) * np.cos(clat) * np.sin(dlon / 2.0) ** 2
    return EARTH_RADIUS_KM * 2.0 * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))


def _lloyd(
    lat: np.ndarray, lon: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Plain k-means over great-circle distance with k-means++ seeding.

    Empty clusters are reseeded deterministically at the points farthest
    from their current center. Returns the cluster label of every point.
    """
    n = lat.size
    first = int(rng.integers(n))
    clat = np.empty(k)
    clon = np.empty(k)
    clat[0], clon[0] = lat[first], lon[first]
    d2 = _cross_km(lat, lon, clat[:1], clon[:1])[:, 0] ** 2
    for c in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(np.argmax(d2))  # all residuals zero: degenerate duplicates
        clat[c], clon[c] = lat[idx], lon[idx]
        nd = _cross_km(lat, lon, clat[c : c + 1], clon[c : c + 1])[:, 0]
        d2 = np.minimum(d2, nd * nd)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        dmat = _cross_km(lat, lon, clat, clon)
        new_labels = dmat.argmin(axis=1).astype(np.int64)
        counts = np.bincount(new_labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            mind = dmat[np.arange(n), new_labels]
            farthest = np.argsort(-mind, kind="stable")
            for c, pt in zip(empties, farthest):
                new_labels[pt] = c
        elif np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        sums_lat = np.bincount(labels, weights=lat, minlength=k)
        sums_lon = np.bincount(labels, weights=lon, minlength=k)
        nz = counts > 0
        clat[nz] = sums_lat[nz] / counts[nz]
        clon[nz] = sums_lon[nz] / counts[nz]
    return labels


def _coords(topo: Topology) -> tuple[np.ndarray, np.ndarray]:
    lat = np.array([s.location.lat_deg for s in topo.stations], dtype=np.float64)
    lon = np.array([s.location.lon_deg for s in topo.stations], dtype=np.float64)
    return lat, lon


def _all_self(topo: Topology, hp: HyperParams) -> Placement:
    return make_placement(np.arange(topo.n), topo.d_th_km, hp.capacity_max)


def kmeans_repetitive(topo: Topology, hp: HyperParams, seed: int = 0) -> Placement:
    """k-means with growing K until every cluster is feasible.

    K starts at the capacity lower bound ceil(sum(workload) / capacity_max).
    Each cluster's head is the member nearest the cluster centroid; the
    clustering is accepted once every member lies within d_th_km of its
    head and every cluster's total load fits capacity_max.
    """
    n = topo.n
    delta = topo.workloads
    cap = hp.capacity_max
    lat, lon = _coords(topo)
    k0 = max(1, int(math.ceil(float(delta.sum()) / cap)))
    for k in range(k0, n + 1):
        if k == n:
            return _all_self(topo, hp)
        labels = _lloyd(lat, lon, k, np.random.default_rng([seed, k]))
        assign = np.full(n, -1, dtype=np.int64)
        ok = True
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if members.size == 0:
                continue
            cent_lat = np.array([lat[members].mean()])
            cent_lon = np.array([lon[members].mean()])
            d_cent = _cross_km(lat[members], lon[members], cent_lat, cent_lon)[:, 0]
            head = int(members[np.argmin(d_cent)])
            if float(delta[members].sum()) > cap or np.any(
                topo.dist_km[members, head] > topo.d_th_km
            ):
                ok = False
                break
            assign[members] = head
        if ok:
            return make_placement(assign, topo.d_th_km, cap)
    return _all_self(topo, hp)


def kmtk(topo: Topology, hp: HyperParams, seed: int = 0) -> Placement:
    """Geometric clustering first, capacity packing second.

    Stage 1 grows K until every member lies within d_th_km of its cluster's
    highest-load node. Stage 2 runs the top-workload head fill inside each
    cluster so capacity is respected; that can only add servers.
    """
    n = topo.n
    delta = topo.workloads
    lat, lon = _coords(topo)
    labels = np.arange(n, dtype=np.int64)
    for k in range(1, n + 1):
        if k == n:
            labels = np.arange(n, dtype=np.int64)
            break
        cand = _lloyd(lat, lon, k, np.random.default_rng([seed, k]))
        ok = True
        for c in range(k):
            members = np.flatnonzero(cand == c)
            if members.size == 0:
                continue
            head = int(members[np.lexsort((members, -delta[members]))[0]])
            if np.any(topo.dist_km[members, head] > topo.d_th_km):
                ok = False
                break
        if ok:
            labels = cand
            break
    assign = np.full(n, -1, dtype=np.int64)
    unassigned = np.ones(n, dtype=bool)
    for c in np.unique(labels):
        member_mask = labels == c
        while np.any(unassigned & member_mask):
            cand_ids = np.flatnonzero(unassigned & member_mask)
            head = int(cand_ids[np.lexsort((cand_ids, -delta[cand_ids]))[0]])
            _fill_from_head(head, assign, unassigned, topo, hp.capacity_max, members=member_mask)
    return make_placement(assign, topo.d_th_km, hp.capacity_max)


@dataclass(frozen=True)
class GaParams:
    """Evolution knobs for the genetic baseline."""

    population: int = 50
    generations: int = 500
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    elitism: int = 1

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError(f"population must be >= 2, got {self.population}")
        if self.generations < 1:
            raise ValueError(f"generations must be >= 1, got {self.generations}")
        if self.tournament_size < 1:
            raise ValueError(f"tournament_size must be >= 1, got {self.tournament_size}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError(f"crossover_rate must be in [0, 1], got {self.crossover_rate}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if not 0 <= self.elitism < self.population:
            raise ValueError(f"elitism must be in [0, population), got {self.elitism}")


def decode_chromosome(genes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gene i points at station i's destination; pointed-at stations become
    servers and serve themselves. Returns (server mask, assignment vector)."""
    es_mask = np.zeros(n, dtype=bool)
    es_mask[genes] = True
    assign = np.where(es_mask, np.arange(n), genes)
    return es_mask, assign


def chromosome_fitness(genes: np.ndarray, topo: Topology, hp: HyperParams) -> float:
    """Combination cost of the decoded placement plus a flat soft penalty of
    10 * fixed_value per capacity-violating cluster (lower is better)."""
    es_mask, assign = decode_chromosome(genes, topo.n)
    loads = np.bincount(assign, weights=topo.workloads, minlength=topo.n)
    violating = int((loads > hp.capacity_max).sum())
    total = float(topo.dist_km[np.arange(topo.n), assign].sum())
    return total + SERVER_COST * int(es_mask.sum()) + 10.0 * hp.fixed_value * violating


def _repair(genes: np.ndarray, topo: Topology, hp: HyperParams) -> np.ndarray:
    """Move members out of overloaded clusters, farthest first, each to the
    nearest server with room, else to a new server at the member itself."""
    n = topo.n
    delta = topo.workloads
    cap = hp.capacity_max
    dist = topo.dist_km
    es_mask, assign = decode_chromosome(genes, n)
    assign = assign.copy()
    loads = np.bincount(assign, weights=delta, minlength=n)
    ids = np.arange(n)
    for j in range(n):
        if not es_mask[j] or loads[j] <= cap:
            continue
        members = np.flatnonzero((assign == j) & (ids != j))
        for m in members[np.argsort(-dist[j, members], kind="stable")]:
            if loads[j] <= cap:
                break
            dm = float(delta[m])
            cands = np.flatnonzero(es_mask & (dist[m] <= topo.d_th_km) & (loads + dm <= cap))
            cands = cands[cands != j]
            if cands.size:
                tgt = int(cands[np.argmin(dist[m, cands])])
            else:
                tgt = int(m)
                es_mask[m] = True
            assign[m] = tgt
            loads[j] -= dm
            loads[tgt] += dm
    return assign


def _tournament(rng: np.random.Generator, fitness: np.ndarray, size: int) -> int:
    drawn = rng.integers(fitness.size, size=size)
    return int(drawn[np.argmin(fitness[drawn])])


def genetic(
    topo: Topology, hp: HyperParams, seed: int = 0, params: GaParams | None = None
) -> Placement:
    """Evolve destination vectors and return the repaired best individual."""
    params = params or GaParams()
    rng = np.random.default_rng(seed)
    n = topo.n
    nbrs = topo.neighbors
    pop = np.empty((params.population, n), dtype=np.int64)
    for i in range(n):
        pop[:, i] = nbrs[i][rng.integers(nbrs[i].size, size=params.population)]
    fitness = np.array([chromosome_fitness(ind, topo, hp) for ind in pop])
    best_idx = int(np.argmin(fitness))
    best = pop[best_idx].copy()
    best_fit = float(fitness[best_idx])
    for _ in range(params.generations):
        new_pop = np.empty_like(pop)
        order = np.argsort(fitness, kind="stable")
        for e in range(params.elitism):
            new_pop[e] = pop[order[e]]
        filled = params.elitism
        while filled < params.population:
            p1 = pop[_tournament(rng, fitness, params.tournament_size)]
            p2 = pop[_tournament(rng, fitness, params.tournament_size)]
            c1 = p1.copy()
            c2 = p2.copy()
            if n > 1 and rng.random() < params.crossover_rate:
                cut = int(rng.integers(1, n))
                c1[cut:] = p2[cut:]
                c2[cut:] = p1[cut:]
            for child in (c1, c2):
                if filled >= params.population:
                    break
                for i in np.flatnonzero(rng.random(n) < params.mutation_rate):
                    child[i] = nbrs[i][rng.integers(nbrs[i].size)]
                new_pop[filled] = child
                filled += 1
        pop = new_pop
        fitness = np.array([chromosome_fitness(ind, topo, hp) for ind in pop])
        gen_best = int(np.argmin(fitness))
        if float(fitness[gen_best]) < best_fit:
            best_fit = float(fitness[gen_best])
            best = pop[gen_best].copy()
    return make_placement(_repair(best, topo, hp), topo.d_th_km, hp.capacity_max)
