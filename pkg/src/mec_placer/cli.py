"""Benchmark harness CLI.

Subcommands: ``synth`` writes a synthetic station CSV, ``ingest`` converts
raw request records into a station CSV, ``run`` executes one or more
algorithms on an instance and writes per-algorithm artifacts, ``compare``
runs several algorithms side by side and writes a summary table plus cost
curves. Exit codes: 0 success, 2 bad input or configuration, 3 an emitted
placement failed the feasibility check.

Everything is deterministic for a fixed seed: each algorithm trains on a
sub-seed derived by stable hashing of its name, so adding or removing
algorithms from a run never shifts the others' results. The only
non-deterministic output field is compare.csv's runtime_ms column.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import baselines, dataset, learner
from .evaluation import MetricsReport, feasibility_check, metrics
from .geo import DEFAULT_K_NEAREST, Topology, build_topology
from .mdp import HyperParams
from .model import Placement

ALGORITHM_NAMES = ("qmc", "tdmc", "topk", "topdof", "random", "kmeans", "kmtk", "ga")
RL_ALGORITHMS = ("qmc", "tdmc")
DEFAULT_TDMC_LAMBDA = 0.4
THREADS_ENV = "MEC_PLACER_THREADS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ConfigError(ValueError):
    """Bad flag combination or value; maps to exit code 2."""


def derive_seed(seed: int, name: str) -> int:
    """Stable per-name sub-seed from the global seed (independent of Python hashing)."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _float_repr(v: float) -> str:
    return repr(float(v))


def write_placement_json(path: str | Path, p: Placement) -> None:
    obj = {
        "es_set": sorted(p.es_set),
        "assignment": {str(i): int(a) for i, a in enumerate(p.assignment)},
        "d_th_km": p.d_th_km,
        "capacity_max": p.capacity_max,
    }
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_placement_json(path: str | Path) -> Placement:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    assignment = tuple(obj["assignment"][str(i)] for i in range(len(obj["assignment"])))
    return Placement(
        es_set=frozenset(obj["es_set"]),
        assignment=assignment,
        d_th_km=float(obj["d_th_km"]),
        capacity_max=float(obj["capacity_max"]),
    )


def write_metrics_json(
    path: str | Path, algorithm: str, report: MetricsReport, hp: HyperParams, seed: int, sub_seed: int
) -> None:
    obj = {
        "algorithm": algorithm,
        **dataclasses.asdict(report),
        "config": {
            "alpha": hp.alpha,
            "gamma": hp.gamma,
            "lambda": hp.lam if algorithm in RL_ALGORITHMS else None,
            "episodes": hp.episodes if algorithm in RL_ALGORITHMS else None,
            "d_th_km": hp.d_th_km,
            "capacity_max": hp.capacity_max,
            "fixed_value": hp.fixed_value,
            "seed": seed,
            "sub_seed": sub_seed,
        },
    }
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def write_cost_trace_csv(path: str | Path, cost_trace: tuple[float, ...]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("episode,path_cost\n")
        for t, c in enumerate(cost_trace):
            fh.write(f"{t},{_float_repr(c)}\n")


@dataclasses.dataclass
class AlgoRun:
    """One algorithm's outcome within a run or comparison."""

    algorithm: str
    placement: Placement
    report: MetricsReport
    cost_trace: tuple[float, ...] | None
    runtime_ms: float
    hp: HyperParams
    sub_seed: int


def _hyperparams_for(alg: str, args: argparse.Namespace, d_th_km: float) -> HyperParams:
    lam = 0.0
    if alg == "tdmc":
        lam = DEFAULT_TDMC_LAMBDA if args.lam is None else args.lam
    return HyperParams(
        alpha=args.alpha,
        gamma=args.gamma,
        lam=lam,
        episodes=args.episodes,
        d_th_km=d_th_km,
        capacity_max=args.cap,
        fixed_value=args.fixed_value,
    )


def execute_algorithm(alg: str, topo: Topology, hp: HyperParams, sub_seed: int) -> AlgoRun:
    """Run one algorithm and score its placement; raises on infeasible output."""
    start = time.perf_counter()
    cost_trace: tuple[float, ...] | None = None
    if alg in RL_ALGORITHMS:
        result = learner.train(topo, hp, sub_seed, mode=alg)
        placement = result.best_placement
        cost_trace = result.cost_trace
    elif alg in baselines.HEAD_RULES:
        placement = baselines.head_cluster(topo, hp, alg, sub_seed)
    elif alg == "kmeans":
        placement = baselines.kmeans_repetitive(topo, hp, sub_seed)
    elif alg == "kmtk":
        placement = baselines.kmtk(topo, hp, sub_seed)
    elif alg == "ga":
        placement = baselines.genetic(topo, hp, sub_seed)
    else:
        raise ConfigError(f"unknown algorithm: {alg!r}")
    runtime_ms = (time.perf_counter() - start) * 1000.0
    violations = feasibility_check(placement, topo, hp)
    if violations:
        raise InfeasibleOutput(alg, violations)
    return AlgoRun(alg, placement, metrics(placement, topo), cost_trace, runtime_ms, hp, sub_seed)


class InfeasibleOutput(RuntimeError):
    """An algorithm emitted a constraint-violating placement; maps to exit code 3."""

    def __init__(self, algorithm: str, violations: list):
        super().__init__(f"{algorithm} emitted an infeasible placement: {violations[:3]}")
        self.algorithm = algorithm
        self.violations = violations


def _parse_workload(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--workload expects LO:HI, got {text!r}") from exc
    return lo, hi


def _parse_bbox(text: str) -> tuple[float, float, float, float]:
    try:
        a, b, c, d = (float(part) for part in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--bbox expects LAT_MIN:LON_MIN:LAT_MAX:LON_MAX, got {text!r}") from exc
    return a, b, c, d


def _parse_algorithms(raw: list[str] | None, default: tuple[str, ...] = ()) -> list[str]:
    if not raw:
        return list(default)
    names: list[str] = []
    for chunk in raw:
        for name in chunk.split(","):
            name = name.strip()
            if not name:
                continue
            if name not in ALGORITHM_NAMES:
                raise ConfigError(
                    f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHM_NAMES)}"
                )
            if name not in names:
                names.append(name)
    return names


def _parse_sweep(text: str) -> list[float]:
    key, _, values = text.partition("=")
    if key.strip() != "dth" or not values:
        raise ConfigError(f"--sweep expects dth=V1,V2,..., got {text!r}")
    try:
        return [float(v) for v in values.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--sweep values must be numbers, got {text!r}") from exc


def _load_instance(args: argparse.Namespace) -> list:
    if (args.infile is None) == (args.synth is None):
        raise ConfigError("exactly one of --in or --synth is required")
    if args.infile is not None:
        stations = dataset.read_stations_csv(args.infile)
    else:
        stations = dataset.synthesize(args.synth, derive_seed(args.seed, "instance"))
    over = [s.id for s in stations if s.workload > args.cap]
    if over:
        raise ConfigError(
            f"{len(over)} station(s) exceed capacity {args.cap} (first: id {over[0]}); "
            "filter the instance first (see the ingest subcommand)"
        )
    return stations


def _check_lambda_usage(args: argparse.Namespace, algorithms: list[str]) -> None:
    if args.lam is not None and "tdmc" not in algorithms:
        raise ConfigError("--lambda applies to the tdmc algorithm; add tdmc or drop --lambda")
    if args.lam is not None and not 0.0 <= args.lam <= 1.0:
        raise ConfigError(f"--lambda must be in [0, 1], got {args.lam}")


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, workers)


def _execute_all(algorithms: list[str], topo: Topology, args: argparse.Namespace, d_th_km: float) -> list[AlgoRun]:
    jobs = [
        (alg, _hyperparams_for(alg, args, d_th_km), derive_seed(args.seed, alg))
        for alg in algorithms
    ]
    workers = min(_thread_count(), len(jobs))
    if workers <= 1:
        return [execute_algorithm(alg, topo, hp, sub) for alg, hp, sub in jobs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(execute_algorithm, alg, topo, hp, sub) for alg, hp, sub in jobs]
        return [f.result() for f in futures]


def _write_algo_artifacts(out_dir: Path, run: AlgoRun, seed: int) -> None:
    write_placement_json(out_dir / f"placement_{run.algorithm}.json", run.placement)
    write_metrics_json(
        out_dir / f"metrics_{run.algorithm}.json", run.algorithm, run.report, run.hp, seed, run.sub_seed
    )
    if run.cost_trace is not None:
        write_cost_trace_csv(out_dir / f"cost_trace_{run.algorithm}.csv", run.cost_trace)


def _write_compare_csv(path: Path, runs: list[AlgoRun]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(
            "algorithm,k,avg_delay_km,avg_delay_ms,total_distance_km,combination_cost,runtime_ms\n"
        )
        for r in runs:
            m = r.report
            fh.write(
                f"{r.algorithm},{m.k},{_float_repr(m.avg_delay_km)},{_float_repr(m.avg_delay_ms)},"
                f"{_float_repr(m.total_distance_km)},{_float_repr(m.combination_cost)},"
                f"{round(r.runtime_ms, 3)}\n"
            )


def _write_cost_curves_csv(path: Path, runs: list[AlgoRun]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("algorithm,episode,path_cost\n")
        for r in runs:
            if r.cost_trace is None:
                continue
            for t, c in enumerate(r.cost_trace):
                fh.write(f"{r.algorithm},{t},{_float_repr(c)}\n")


def cmd_synth(args: argparse.Namespace) -> int:
    stations = dataset.synthesize(
        args.n,
        args.seed,
        bbox=_parse_bbox(args.bbox),
        workload_range=_parse_workload(args.workload),
        cluster_count=args.clusters,
    )
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_stations_csv(out, stations)
    print(f"wrote {len(stations)} stations to {out}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    records = dataset.read_request_records(args.infile)
    stations = dataset.ingest_records(records)
    if not args.no_filter:
        stations = dataset.preprocess(
            stations,
            capacity_max=args.cap,
            outlier_radius_km=args.outlier_radius,
            min_neighbors=args.min_neighbors,
        )
    out = Path(args.out)
    dataset.write_stations_csv(out, stations)
    print(f"wrote {len(stations)} stations to {out}")
    return EXIT_OK


def _run_on_instance(args: argparse.Namespace, algorithms: list[str], out_dir: Path, d_th_km: float, write_compare: bool) -> None:
    stations = _load_instance(args)
    topo = build_topology(stations, d_th_km, DEFAULT_K_NEAREST)
    runs = _execute_all(algorithms, topo, args, d_th_km)
    out_dir.mkdir(parents=True, exist_ok=True)
    for run in runs:
        _write_algo_artifacts(out_dir, run, args.seed)
        m = run.report
        print(
            f"{run.algorithm}: k={m.k} combination_cost={m.combination_cost:.3f} "
            f"avg_delay_ms={m.avg_delay_ms:.6f} ({run.runtime_ms:.0f} ms)"
        )
    if write_compare:
        _write_compare_csv(out_dir / "compare.csv", runs)
        _write_cost_curves_csv(out_dir / "cost_curves.csv", runs)


def cmd_run(args: argparse.Namespace) -> int:
    algorithms = _parse_algorithms(args.alg)
    if not algorithms:
        raise ConfigError("run needs at least one --alg")
    _check_lambda_usage(args, algorithms)
    _run_on_instance(args, algorithms, Path(args.out), args.dth, write_compare=False)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    algorithms = _parse_algorithms(args.alg, default=ALGORITHM_NAMES)
    if len(algorithms) < 2:
        raise ConfigError("compare needs at least two algorithms")
    _check_lambda_usage(args, algorithms)
    if args.sweep:
        for value in _parse_sweep(args.sweep):
            sub = Path(args.out) / f"dth_{value:g}"
            _run_on_instance(args, algorithms, sub, value, write_compare=True)
    else:
        _run_on_instance(args, algorithms, Path(args.out), args.dth, write_compare=True)
    return EXIT_OK


def _add_instance_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--in", dest="infile", metavar="CSV", help="station CSV (id,lat,lon,workload)")
    sub.add_argument(
        "--synth",
        type=int,
        metavar="N",
        help="generate an N-station synthetic instance instead of reading a CSV",
    )
    sub.add_argument("--dth", type=float, default=9.0, help="coverage threshold in km (default 9)")
    sub.add_argument("--cap", type=float, default=150.0, help="server capacity (default 150)")
    sub.add_argument("--alpha", type=float, default=0.4, help="learning rate (default 0.4)")
    sub.add_argument("--gamma", type=float, default=0.9, help="discount factor (default 0.9)")
    sub.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=None,
        help="trace decay for tdmc (default 0.4; qmc always runs at 0)",
    )
    sub.add_argument("--episodes", type=int, default=2000, help="training episodes (default 2000)")
    sub.add_argument(
        "--fixed-value",
        dest="fixed_value",
        type=float,
        default=None,
        help="new-server surcharge (default: dth + 1)",
    )
    sub.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument(
        "--alg",
        action="append",
        metavar="NAME",
        help=f"algorithm to run; repeat or comma-separate ({', '.join(ALGORITHM_NAMES)})",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mec-placer",
        description="Edge-server placement and workload-allocation benchmark harness.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="write a synthetic station CSV")
    synth.add_argument("--n", type=int, required=True, help="number of stations (>= 2)")
    synth.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument(
        "--workload",
        default="20:80",
        metavar="LO:HI",
        help="integer workload range (default 20:80)",
    )
    synth.add_argument(
        "--bbox",
        default="31.0:121.3:31.3:121.6",
        metavar="LAT_MIN:LON_MIN:LAT_MAX:LON_MAX",
        help="bounding box in degrees",
    )
    synth.add_argument("--clusters", type=int, default=5, help="Gaussian blob count (default 5)")
    synth.set_defaults(func=cmd_synth)

    ingest = subs.add_parser("ingest", help="aggregate request records into a station CSV")
    ingest.add_argument("--in", dest="infile", required=True, help="request-record CSV")
    ingest.add_argument("--out", required=True, help="output station CSV path")
    ingest.add_argument("--cap", type=float, default=150.0, help="capacity filter (default 150)")
    ingest.add_argument(
        "--outlier-radius", type=float, default=3.0, help="isolation radius in km (default 3)"
    )
    ingest.add_argument(
        "--min-neighbors", type=int, default=5, help="neighbor floor within the radius (default 5)"
    )
    ingest.add_argument(
        "--no-filter", action="store_true", help="skip capacity and outlier filtering"
    )
    ingest.set_defaults(func=cmd_ingest)

    run = subs.add_parser("run", help="run algorithms on one instance")
    _add_instance_options(run)
    run.set_defaults(func=cmd_run)

    compare = subs.add_parser("compare", help="run several algorithms and tabulate results")
    _add_instance_options(compare)
    compare.add_argument(
        "--sweep",
        metavar="dth=V1,V2,...",
        help="repeat the comparison for each coverage threshold, one subdirectory per value",
    )
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleOutput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
