"""Benchmark harness: throughput/speedup metrics with geometric statistics,
grid sweeps over pre-generated circuit instances, batch-size cost curves,
and lossless CSV emission.

Throughput is unique labeled bitstrings per second of contraction-loop time.
Loop time excludes path planning for the pre-sampled modes (paths are cached
once up front) and includes it for the baseline, which replans every shot by
definition.  Speedups are only ever computed between runs that share circuit
seeds; per-point summaries are geometric means with geometric standard
deviations because throughputs span orders of magnitude.
"""

from __future__ import annotations

import csv
import time
from dataclasses import replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuits import Circuit, random_circuit
from .engine import (
    BatchPlan,
    CircuitNetwork,
    RunConfig,
    RunResult,
    SamplerContext,
    marginal_network,
    run_mode,
    spawn_rng,
)
from .errors import ResourceLimitError, SimulationError
from .planner import cache_lookup_or_plan
from .tensor import execute_path

FAILURE_FLAG_FRACTION = 0.2  # summaries go "hollow" above this failure rate


def throughput(unique_shots: int, loop_seconds: float) -> float:
    """Unique labeled bitstrings per second of loop time."""
    if loop_seconds <= 0.0:
        raise ValueError(f"cannot compute throughput over {loop_seconds} s of loop time")
    if unique_shots < 0:
        raise ValueError("unique shot count cannot be negative")
    return unique_shots / loop_seconds


def speedup(fast: float, slow: float) -> float:
    """Ratio of two throughputs."""
    if slow <= 0.0:
        raise ValueError("reference throughput must be positive")
    return fast / slow


def geo_stats(values: Sequence[float]) -> tuple[float, float]:
    """Geometric mean and geometric standard deviation."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("geo_stats needs at least one value")
    if np.any(arr <= 0.0):
        raise ValueError("geo_stats requires strictly positive values")
    logs = np.log(arr)
    return float(np.exp(logs.mean())), float(np.exp(logs.std()))


def result_throughput(result: RunResult) -> float:
    return throughput(result.unique_shots, result.loop_seconds)


def circuit_instance_seed(root_seed: int, n: int, g: int, instance: int) -> int:
    """Scalar generation seed for one circuit instance.  Depends only on
    (root, n, g, instance) - never on mode - so every mode at a sweep point
    reuses the same circuits, and a CSV row's circuit_seed alone regenerates
    its circuit via numpy's default_rng."""
    return int(spawn_rng(root_seed, 10, n, g, instance).integers(2**63))


def instance_circuit(config: RunConfig, root_seed: int, instance: int) -> tuple[Circuit, int]:
    """Pre-generated circuit for one sweep instance, plus its scalar seed."""
    circuit_seed = circuit_instance_seed(root_seed, config.n, config.g, instance)
    c = random_circuit(
        config.n,
        config.g,
        two_qubit_fraction=config.two_qubit_fraction,
        p_range=config.p_range,
        rng=np.random.default_rng(circuit_seed),
    )
    return c, circuit_seed


CSV_COLUMNS = [
    "row_type",
    "mode",
    "n",
    "g",
    "instance",
    "circuit_seed",
    "run_seed",
    "batch_sizes",
    "final_mode",
    "tau",
    "nonfinal_shots",
    "hypersamples",
    "error_sets",
    "total_shots",
    "unique_shots",
    "path_time_s",
    "loop_time_s",
    "contract_time_s",
    "throughput",
    "speedup",
    "plan_events",
    "contract_events",
    "failed",
    "failed_fraction",
    "geo_mean_throughput",
    "gsd_throughput",
    "geo_mean_speedup",
    "gsd_speedup",
    "flagged",
    "error",
]


def _config_echo(config: RunConfig) -> dict:
    plan = config.plan() if config.mode != "baseline" else BatchPlan.fixed(config.n, config.baseline_batch)
    return {
        "mode": config.mode,
        "n": config.n,
        "g": config.g,
        "batch_sizes": ",".join(str(b) for b in plan.sizes),
        "final_mode": config.final_mode,
        "tau": repr(config.tau),
        "nonfinal_shots": config.nonfinal_shots,
        "hypersamples": config.baseline_hypersamples if config.mode == "baseline" else config.hypersamples,
        "error_sets": config.error_sets,
        "total_shots": config.total_shots,
    }


def run_instance(c: Circuit, config: RunConfig, instance: int, circuit_seed: int) -> dict:
    """One run reduced to an instance row; resource-guard trips are recorded
    in the row rather than raised."""
    row = {"row_type": "instance", "instance": instance, "circuit_seed": circuit_seed,
           "run_seed": config.seed, "failed": False, "error": ""}
    row.update(_config_echo(config))
    try:
        result = run_mode(c, config)
    except (ResourceLimitError, SimulationError) as exc:
        row["failed"] = True
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        unique_shots=result.unique_shots,
        path_time_s=repr(result.timings["path_s"]),
        loop_time_s=repr(result.loop_seconds),
        contract_time_s=repr(result.timings["contract_s"]),
        throughput=repr(result_throughput(result)),
        plan_events=result.plan_events,
        contract_events=result.contract_events,
    )
    return row


def _sweep_point(
    template: RunConfig,
    n: int,
    g: int,
    modes: Sequence[str],
    circuits_per_point: int,
    circuits: Optional[Sequence[Circuit]],
) -> list[dict]:
    sizes = template.batch_sizes
    if sizes is not None and sum(sizes) != n:
        sizes = None  # explicit staging only fits its own n
    point_cfg = replace(template, n=n, g=g, batch_sizes=sizes)
    instances = []
    for i in range(circuits_per_point):
        if circuits is not None:
            c, cseed = circuits[i], template.seed
        else:
            c, cseed = instance_circuit(point_cfg, template.seed, i)
        instances.append((i, c, cseed))
    per_mode: dict[str, list[dict]] = {}
    for mode in modes:
        mode_rows = []
        for i, c, cseed in instances:
            cfg = replace(
                point_cfg,
                mode=mode,
                seed=int(spawn_rng(template.seed, 11, n, g, i).integers(2**31)),
            )
            mode_rows.append(run_instance(c, cfg, i, cseed))
        per_mode[mode] = mode_rows
    baseline_tp = {
        r["instance"]: float(r["throughput"])
        for r in per_mode.get("baseline", ())
        if not r["failed"]
    }
    for mode in modes:
        if mode == "baseline":
            continue
        for r in per_mode[mode]:
            tp_base = baseline_tp.get(r["instance"])
            if not r["failed"] and tp_base:
                r["speedup"] = repr(speedup(float(r["throughput"]), tp_base))
    rows: list[dict] = []
    for mode in modes:
        rows.extend(per_mode[mode])
        rows.append(_summary_row(per_mode[mode]))
    return rows


def sweep(
    template: RunConfig,
    ns: Sequence[int],
    gs: Sequence[int],
    modes: Sequence[str],
    circuits_per_point: int = 10,
    circuits: Optional[Sequence[Circuit]] = None,
    point_workers: int = 1,
) -> list[dict]:
    """Grid sweep: for every (n, g) point, run each mode over the same
    `circuits_per_point` pre-generated circuit instances.  Emits instance
    rows plus one summary row per (point, mode) carrying geometric stats and
    the failure fraction (flagged above 20%).

    Passing `circuits` pins the instance list (single-point sweeps only).
    `point_workers` > 1 runs grid points concurrently; seeds and row order
    stay deterministic, but concurrent runs share cores, so leave it at 1
    when the wall-clock throughput numbers matter.
    """
    if circuits is not None and (len(ns) != 1 or len(gs) != 1):
        raise ValueError("explicit circuits require a single (n, g) point")
    points = [(n, g) for n in ns for g in gs]
    if point_workers > 1 and len(points) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=point_workers) as pool:
            blocks = list(
                pool.map(
                    lambda p: _sweep_point(
                        template, p[0], p[1], modes, circuits_per_point, circuits
                    ),
                    points,
                )
            )
    else:
        blocks = [
            _sweep_point(template, n, g, modes, circuits_per_point, circuits)
            for n, g in points
        ]
    return [row for block in blocks for row in block]


def _summary_row(instance_rows: list[dict]) -> dict:
    ok = [r for r in instance_rows if not r["failed"]]
    failed_fraction = 1.0 - len(ok) / len(instance_rows)
    base = instance_rows[0]
    row = {
        "row_type": "summary",
        "mode": base["mode"],
        "n": base["n"],
        "g": base["g"],
        "batch_sizes": base["batch_sizes"],
        "final_mode": base["final_mode"],
        "tau": base["tau"],
        "hypersamples": base["hypersamples"],
        "error_sets": base["error_sets"],
        "total_shots": base["total_shots"],
        "failed_fraction": repr(failed_fraction),
        "flagged": failed_fraction > FAILURE_FLAG_FRACTION,
    }
    if ok:
        gm, gsd = geo_stats([float(r["throughput"]) for r in ok])
        row["geo_mean_throughput"] = repr(gm)
        row["gsd_throughput"] = repr(gsd)
        sp = [float(r["speedup"]) for r in ok if r.get("speedup")]
        if sp:
            gms, gsds = geo_stats(sp)
            row["geo_mean_speedup"] = repr(gms)
            row["gsd_speedup"] = repr(gsds)
    return row


def batch_time_curve(
    c: Circuit,
    b_values: Sequence[int],
    hypersamples: int = 100,
    seed: int = 0,
    reps: int = 3,
    max_intermediate: int = 2**26,
) -> list[dict]:
    """Contraction time of one batch-stage population vector vs batch size.

    For each b, plans the first-stage marginal of a fixed(n, b) plan once
    (excluded from timing), then times the stage contraction `reps` times
    and reports the best, total and per-qubit figures.
    """
    rows = []
    template = CircuitNetwork.from_circuit(c)
    for b in b_values:
        if b > c.n:
            continue
        plan = BatchPlan.fixed(c.n, b)
        ctx = SamplerContext(hypersamples=hypersamples, planner_seed=seed,
                             max_intermediate=max_intermediate)
        mnet = marginal_network(template, plan, 1, "")
        t0 = time.perf_counter()
        path, _ = cache_lookup_or_plan(
            ctx.cache, mnet.net, stage=1, hypersamples=hypersamples, rng=spawn_rng(seed, 3, b)
        )
        path_s = time.perf_counter() - t0
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            execute_path(mnet.net, path, max_intermediate_entries=max_intermediate)
            times.append(time.perf_counter() - t0)
        best = min(times)
        rows.append(
            {
                "b": b,
                "stage_seconds": best,
                "per_qubit_seconds": best / b,
                "path_seconds": path_s,
                "est_cost": path.est_cost,
                "reps": reps,
            }
        )
    return rows


def write_csv(rows: Iterable[dict], fp) -> None:
    writer = csv.DictWriter(fp, fieldnames=CSV_COLUMNS, extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def read_csv(fp) -> list[dict]:
    return [dict(row) for row in csv.DictReader(fp)]
