"""Training loops for the cost-minimizing agents.

Two tabular agents share one episode loop: the one-step minimizer ("qmc")
and its eligibility-trace generalization ("tdmc"). With lam = 0 the trace
path degenerates to the one-step update, so both names run identical code
and produce bit-identical results for the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geo import Topology
from .mdp import (
    EpisodeContext,
    HyperParams,
    apply_action,
    epsilon,
    feasible_actions,
    penalty,
)
from .model import Placement, make_placement

MODE_QMC = "qmc"
MODE_TDMC = "tdmc"
Q_INIT_BLOCKED = 1000.0
TRACE_CUTOFF = 1e-8


@dataclass(frozen=True)
class TrainResult:
    """Outcome of a training run."""

    best_placement: Placement
    best_cost: float
    cost_trace: tuple[float, ...]
    episodes_run: int
    seed: int


def init_qtable(topo: Topology) -> np.ndarray:
    """n x n action-value table: 0 for in-range pairs, 1000 for unreachable ones."""
    return np.where(topo.adj, 0.0, Q_INIT_BLOCKED)


class TraceTable:
    """Accumulating eligibility traces with an active-cell index for sparse decay."""

    __slots__ = ("e", "_active")

    def __init__(self, n: int):
        self.e = np.zeros((n, n), dtype=np.float64)
        self._active: dict[tuple[int, int], None] = {}

    def active_cells(self) -> list[tuple[int, int]]:
        return list(self._active)

    def bump(self, s: int, a: int) -> None:
        self.e[s, a] += 1.0
        self._active[(s, a)] = None

    def drop(self, s: int, a: int) -> None:
        self.e[s, a] = 0.0
        del self._active[(s, a)]

    def reset(self) -> None:
        for s, a in self._active:
            self.e[s, a] = 0.0
        self._active.clear()


def _min_next(q: np.ndarray, s_next: int, topo: Topology) -> float:
    """Min action value at the next state over its static neighbor set; 0 past the end."""
    if s_next >= topo.n:
        return 0.0
    return float(q[s_next, topo.neighbors[s_next]].min())


def q_update(
    q: np.ndarray, s: int, a: int, p: float, s_next: int, topo: Topology, hp: HyperParams
) -> None:
    """One-step update toward p + gamma * min over the next state's actions."""
    err = p + hp.gamma * _min_next(q, s_next, topo) - q[s, a]
    q[s, a] += hp.alpha * err

def td_lambda_step(
    q: np.ndarray,
    e: TraceTable,
    s: int,
    a: int,
    p: float,
    s_next: int,
    topo: Topology,
    hp: HyperParams,
) -> None:
    """Backward-view update: bump the visited pair's trace by 1, spread the
    current error over every traced pair, then decay all traces by gamma*lam,
    dropping those below the cutoff."""
    err = p + hp.gamma * _min_next(q, s_next, topo) - q[s, a]
    e.bump(s, a)
    decay = hp.gamma * hp.lam
    for cell in e.active_cells():
        tr = e.e[cell]
        q[cell] += hp.alpha * err * tr
        tr = tr * decay
        if tr < TRACE_CUTOFF:
            e.drop(*cell)
        else:
            e.e[cell] = tr


def _select(
    rng: np.random.Generator, eps: float, i: int, cands: np.ndarray, q: np.ndarray, topo: Topology
) -> int:
    """Epsilon-greedy pick: uniform with probability eps, else min Q-value
    with ties broken by smaller distance, then smaller id."""
    if eps > 0.0 and rng.random() < eps:
        return int(cands[rng.integers(cands.size)])
    qv = q[i, cands]
    best = cands[qv == qv.min()]
    if best.size > 1:
        dv = topo.dist_km[i, best]
        best = best[dv == dv.min()]
    return int(best.min())


def run_episode(
    topo: Topology,
    hp: HyperParams,
    q: np.ndarray,
    rng: np.random.Generator,
    episode_index: int,
    trace: TraceTable | None = None,
    eps: float | None = None,
    learn: bool = True,
) -> tuple[Placement, float]:
    """One pass over all stations in index order.

    Stations already elected as servers are forced to self-serve; everyone
    else picks from the in-range servers with spare capacity (pa) when any
    exist, otherwise from the filtered neighbor list (nei). Every step's
    penalty updates the table (trace-based when lam > 0) and is accumulated
    into the returned path cost.
    """
    n = topo.n
    delta = topo.workloads
    if eps is None:
        eps = epsilon(episode_index)
    use_traces = learn and hp.lam > 0.0
    if use_traces:
        if trace is None:
            trace = TraceTable(n)
        trace.reset()
    ctx = EpisodeContext(n, hp.capacity_max)
    path_cost = 0.0
    for i in range(n):
        if ctx.es_mask[i]:
            a = i
        else:
            pa, nei = feasible_actions(i, ctx, topo)
            cands = pa if pa.size else nei
            if cands.size == 0:
                a = i  # unreachable: nei always keeps self when delta[i] fits
            else:
                a = _select(rng, eps, i, cands, q, topo)
        p = penalty(i, a, ctx, topo, hp)
        if learn:
            if use_traces:
                td_lambda_step(q, trace, i, a, p, i + 1, topo, hp)
            else:
                q_update(q, i, a, p, i + 1, topo, hp)
        apply_action(ctx, i, a, delta)
        path_cost += p
    assert (ctx.assign >= 0).all(), "episode ended with unvisited stations"
    assert math.isclose(float(ctx.wl.sum()), float(delta.sum()), rel_tol=1e-9, abs_tol=1e-6), (
        "reserved load does not match total workload"
    )
    return make_placement(ctx.assign, topo.d_th_km, hp.capacity_max), float(path_cost)


def train(topo: Topology, hp: HyperParams, seed: int, mode: str = MODE_QMC) -> TrainResult:
    """Run hp.episodes training episodes plus one greedy evaluation rollout.

    best_cost is the minimum over the recorded per-episode costs; the final
    greedy rollout (no exploration, no updates) replaces best_placement
    when it is cheaper. mode "qmc" always learns with plain one-step
    updates (lam is forced to 0); "tdmc" accepts any lam in [0, 1] and
    equals "qmc" exactly at lam == 0.
    """
    if mode not in (MODE_QMC, MODE_TDMC):
        raise ValueError(f"unknown mode: {mode!r}")
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    if mode == MODE_QMC and hp.lam != 0.0:
        hp = replace(hp, lam=0.0)
    rng = np.random.default_rng(seed)
    q = init_qtable(topo)
    trace = TraceTable(topo.n) if hp.lam > 0.0 else None
    costs: list[float] = []
    best_cost = float("inf")
    best_placement: Placement | None = None
    for t in range(hp.episodes):
        pl, c = run_episode(topo, hp, q, rng, t, trace=trace)
        costs.append(c)
        if c < best_cost:
            best_cost = c
            best_placement = pl
    greedy_pl, greedy_cost = run_episode(topo, hp, q, rng, hp.episodes, eps=0.0, learn=False)
    if greedy_cost < best_cost:
        best_placement = greedy_pl
    assert best_placement is not None
    return TrainResult(
        best_placement=best_placement,
        best_cost=best_cost,
        cost_trace=tuple(costs),
        episodes_run=hp.episodes,
        seed=seed,
    )
