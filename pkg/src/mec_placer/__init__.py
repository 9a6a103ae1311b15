"""Edge-server placement and workload allocation over base-station maps.

Tabular RL solvers (one-step and eligibility-trace variants), six heuristic
baselines, geospatial preprocessing, a small-instance exhaustive oracle,
and a deterministic benchmark CLI.
"""

from .baselines import GaParams, genetic, head_cluster, kmeans_repetitive, kmtk
from .dataset import (
    RequestRecord,
    ingest_records,
    preprocess,
    read_request_records,
    read_stations_csv,
    synthesize,
    write_stations_csv,
)
from .evaluation import (
    MetricsReport,
    Violation,
    brute_force_optimal,
    feasibility_check,
    metrics,
)
from .geo import Topology, build_topology, delay_ms_from_km, haversine_km, topology_from_matrix
from .learner import TrainResult, init_qtable, q_update, run_episode, td_lambda_step, train
from .mdp import (
    EpisodeContext,
    HyperParams,
    apply_action,
    epsilon,
    feasible_actions,
    penalty,
    priority,
)
from .model import BaseStation, GeoPoint, Placement, make_placement

__version__ = "0.1.0"

__all__ = [
    "BaseStation",
    "EpisodeContext",
    "GaParams",
    "GeoPoint",
    "HyperParams",
    "MetricsReport",
    "Placement",
    "RequestRecord",
    "Topology",
    "TrainResult",
    "Violation",
    "apply_action",
    "brute_force_optimal",
    "build_topology",
    "delay_ms_from_km",
    "epsilon",
    "feasibility_check",
    "feasible_actions",
    "genetic",
    "haversine_km",
    "head_cluster",
    "ingest_records",
    "init_qtable",
    "kmeans_repetitive",
    "kmtk",
    "make_placement",
    "metrics",
    "penalty",
    "preprocess",
    "priority",
    "q_update",
    "read_request_records",
    "read_stations_csv",
    "run_episode",
    "synthesize",
    "td_lambda_step",
    "topology_from_matrix",
    "train",
    "write_stations_csv",
]
