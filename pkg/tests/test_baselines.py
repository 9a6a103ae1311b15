"""Heuristic placement baselines: head-cluster rules, k-means, KmTK, GA."""

from __future__ import annotations

import numpy as np
import pytest

from mec_placer import (
    BaseStation,
    GaParams,
    GeoPoint,
    HyperParams,
    brute_force_optimal,
    build_topology,
    feasibility_check,
    genetic,
    head_cluster,
    kmeans_repetitive,
    kmtk,
    metrics,
    synthesize,
    topology_from_matrix,
    train,
)
from mec_placer.baselines import (
    HEAD_RULES,
    RULE_RANDOM,
    RULE_TOP_DOF,
    RULE_TOP_WORKLOAD,
    chromosome_fitness,
    decode_chromosome,
)


def triangle_topology(workloads, d_th_km: float = 9.0):
    m = np.array([[0.0, 2.0, 3.0], [2.0, 0.0, 1.0], [3.0, 1.0, 0.0]])
    return topology_from_matrix(m, d_th_km=d_th_km, workloads=workloads)


def cluster_stations(center_lat: float, center_lon: float, workloads, start_id: int = 0):
    """A handful of stations a few hundred meters apart around a center."""
    offsets = [(0.0, 0.0), (0.004, 0.0), (0.0, 0.004), (-0.004, 0.0), (0.0, -0.004),
               (0.004, 0.004), (-0.004, -0.004), (0.004, -0.004)]
    return [
        BaseStation(
            id=start_id + i,
            location=GeoPoint(center_lat + dlat, center_lon + dlon),
            workload=float(w),
        )
        for i, ((dlat, dlon), w) in enumerate(zip(offsets, workloads))
    ]


class TestHeadClusterRules:
    def test_top_workload_head_absorbs_everyone_when_capacity_allows(self):
        topo = triangle_topology([50.0, 80.0, 20.0])
        placement = head_cluster(topo, HyperParams(), rule=RULE_TOP_WORKLOAD)
        assert placement.es_set == {1}
        assert placement.assignment == (1, 1, 1)

    def test_fill_stops_at_the_first_overflowing_candidate(self):
        # head 1 (load 80) takes nearby station 2 (rises to 100) but station 0
        # would overflow a 100 cap, so 0 becomes its own head
        topo = triangle_topology([50.0, 80.0, 20.0])
        placement = head_cluster(topo, HyperParams(capacity_max=100.0), rule=RULE_TOP_WORKLOAD)
        assert placement.es_set == {0, 1}
        assert placement.assignment == (0, 1, 1)

    def test_workload_ties_break_by_smallest_id(self):
        m = np.zeros((4, 4))
        topo = topology_from_matrix(m, d_th_km=9.0, workloads=[50.0, 50.0, 50.0, 50.0])
        placement = head_cluster(topo, HyperParams(), rule=RULE_TOP_WORKLOAD)
        assert placement.es_set == {0, 3}
        assert placement.assignment == (0, 0, 0, 3)

    def test_top_dof_picks_the_best_connected_station(self):
        # chain 0 - 1 - 2 under a 5 km threshold: only station 1 reaches both ends
        m = np.array([[0.0, 2.0, 8.0], [2.0, 0.0, 2.0], [8.0, 2.0, 0.0]])
        topo = topology_from_matrix(m, d_th_km=5.0, workloads=[10.0, 10.0, 10.0])
        placement = head_cluster(topo, HyperParams(d_th_km=5.0), rule=RULE_TOP_DOF)
        assert placement.es_set == {1}
        assert placement.assignment == (1, 1, 1)

    def test_random_rule_is_deterministic_per_seed(self, clustered_topology):
        hp = HyperParams()
        first = head_cluster(clustered_topology, hp, rule=RULE_RANDOM, seed=7)
        second = head_cluster(clustered_topology, hp, rule=RULE_RANDOM, seed=7)
        assert first == second
        other = head_cluster(clustered_topology, hp, rule=RULE_RANDOM, seed=8)
        assert other.assignment != first.assignment

    @pytest.mark.parametrize("rule", HEAD_RULES)
    def test_every_rule_yields_a_feasible_placement(self, clustered_topology, rule):
        hp = HyperParams()
        placement = head_cluster(clustered_topology, hp, rule=rule, seed=3)
        assert feasibility_check(placement, clustered_topology, hp) == []

    def test_unknown_rule_is_rejected(self, five_station_topology):
        with pytest.raises(ValueError):
            head_cluster(five_station_topology, HyperParams(d_th_km=7.0), rule="nearest")


class TestKmeansRepetitive:
    def test_two_distant_blobs_get_one_server_each(self):
        stations = cluster_stations(31.05, 121.35, [30.0, 30.0, 30.0])
        stations += cluster_stations(31.25, 121.55, [30.0, 30.0, 30.0], start_id=3)
        topo = build_topology(stations, d_th_km=9.0)
        hp = HyperParams()
        placement = kmeans_repetitive(topo, hp, seed=0)
        assert placement.k == 2
        assert feasibility_check(placement, topo, hp) == []
        low, high = sorted(placement.es_set)
        assert low < 3 <= high  # one head per blob
        assert all(placement.assignment[i] == low for i in range(3))
        assert all(placement.assignment[i] == high for i in range(3, 6))

    def test_load_beyond_two_servers_forces_at_least_three(self):
        stations = cluster_stations(31.1, 121.4, [45.0] * 8)  # 360 total, cap 150
        topo = build_topology(stations, d_th_km=9.0)
        hp = HyperParams()
        placement = kmeans_repetitive(topo, hp, seed=1)
        assert placement.k >= 3
        assert feasibility_check(placement, topo, hp) == []

    def test_heads_sit_at_the_center_of_their_cluster(self, clustered_topology):
        hp = HyperParams()
        placement = kmeans_repetitive(clustered_topology, hp, seed=2)
        assert feasibility_check(placement, clustered_topology, hp) == []
        # every member is within range of its head by construction
        for i, dest in enumerate(placement.assignment):
            assert clustered_topology.dist_km[i, dest] <= hp.d_th_km

    def test_same_seed_reproduces_the_placement(self, clustered_topology):
        hp = HyperParams()
        first = kmeans_repetitive(clustered_topology, hp, seed=5)
        second = kmeans_repetitive(clustered_topology, hp, seed=5)
        assert first == second

    def test_spends_servers_to_buy_delay_compared_with_learning(self):
        topo = build_topology(synthesize(100, seed=12), d_th_km=9.0)
        hp = HyperParams(episodes=150)
        learned = metrics(train(topo, hp, seed=12, mode="qmc").best_placement, topo)
        clustered = metrics(kmeans_repetitive(topo, hp, seed=12), topo)
        assert clustered.k > learned.k
        assert clustered.avg_delay_km < learned.avg_delay_km


class TestKmtk:
    def test_matches_top_workload_fill_on_one_small_cluster(self):
        stations = cluster_stations(31.2, 121.5, [40.0, 30.0, 20.0, 10.0])
        topo = build_topology(stations, d_th_km=9.0)
        hp = HyperParams()
        geometric = kmtk(topo, hp, seed=0)
        greedy = head_cluster(topo, hp, rule=RULE_TOP_WORKLOAD)
        assert geometric == greedy
        assert geometric.es_set == {0}

    def test_packing_splits_an_overloaded_cluster(self):
        stations = cluster_stations(31.2, 121.5, [75.0] * 5)  # 375 total, cap 150
        topo = build_topology(stations, d_th_km=9.0)
        hp = HyperParams()
        placement = kmtk(topo, hp, seed=0)
        assert placement.k == 3  # two stations per server, one left over
        assert feasibility_check(placement, topo, hp) == []

    def test_feasible_on_a_large_synthetic_instance(self, clustered_topology):
        hp = HyperParams()
        placement = kmtk(clustered_topology, hp, seed=4)
        assert feasibility_check(placement, clustered_topology, hp) == []


class TestChromosomes:
    def test_decode_marks_pointed_at_stations_as_servers(self):
        genes = np.array([1, 1, 3, 3, 4])
        es_mask, assign = decode_chromosome(genes, 5)
        assert es_mask.tolist() == [False, True, False, True, True]
        assert assign.tolist() == [1, 1, 3, 3, 4]

    def test_decode_forces_servers_to_serve_themselves(self):
        # station 0 is pointed at by others, so its own outgoing gene is ignored
        genes = np.array([1, 0, 0, 0, 0])
        es_mask, assign = decode_chromosome(genes, 5)
        assert es_mask.tolist() == [True, True, False, False, False]
        assert assign.tolist() == [0, 1, 0, 0, 0]

    def test_all_self_fitness_is_the_flat_server_cost(self, five_station_topology):
        genes = np.arange(5)
        fitness = chromosome_fitness(genes, five_station_topology, HyperParams(d_th_km=7.0))
        assert fitness == 50.0

    def test_capacity_violations_add_a_soft_penalty(self):
        m = np.array([[0.0, 1.0], [1.0, 0.0]])
        topo = topology_from_matrix(m, d_th_km=9.0, workloads=[100.0, 100.0])
        fitness = chromosome_fitness(np.array([0, 0]), topo, HyperParams())
        # 1 km backhaul + one server + one violating cluster at 10 * fixed_value
        assert fitness == 1.0 + 10.0 + 100.0


class TestGenetic:
    def test_default_knobs(self):
        params = GaParams()
        assert params.population == 50
        assert params.generations == 500
        assert params.tournament_size == 3
        assert params.crossover_rate == 0.9
        assert params.mutation_rate == 0.05
        assert params.elitism == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"population": 1},
            {"generations": 0},
            {"tournament_size": 0},
            {"crossover_rate": 1.5},
            {"mutation_rate": -0.1},
            {"elitism": 50},
        ],
    )
    def test_bad_knobs_are_rejected(self, kwargs):
        with pytest.raises(ValueError):
            GaParams(**kwargs)

    def test_finds_the_optimum_on_an_easy_instance(self):
        # pinned-seed regression with the default knobs, not a universal claim
        m = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
        topo = topology_from_matrix(m, d_th_km=9.0, workloads=[10.0, 20.0, 30.0])
        placement = genetic(topo, HyperParams(), seed=0)
        assert placement.es_set == {1}
        assert placement.assignment == (1, 1, 1)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_never_beats_the_exhaustive_oracle(self, seed):
        topo = build_topology(synthesize(6, seed=40 + seed), d_th_km=9.0)
        hp = HyperParams()
        placement = genetic(topo, hp, seed=seed, params=GaParams(population=24, generations=40))
        assert feasibility_check(placement, topo, hp) == []
        optimal = brute_force_optimal(topo, hp)
        assert (
            metrics(placement, topo).combination_cost
            >= metrics(optimal, topo).combination_cost - 1e-9
        )

    def test_same_seed_reproduces_the_placement(self, clustered_topology):
        hp = HyperParams()
        params = GaParams(population=20, generations=15)
        first = genetic(clustered_topology, hp, seed=6, params=params)
        second = genetic(clustered_topology, hp, seed=6, params=params)
        assert first == second
        assert feasibility_check(first, clustered_topology, hp) == []
