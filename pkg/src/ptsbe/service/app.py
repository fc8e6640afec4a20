"""FastAPI service wrapping the simulation engine.

The app holds one process-wide `PathCache`: simulation requests against the
same circuit structure and staging reuse contraction paths planned by
earlier requests, so a long-running service amortizes planning across
clients the same way one run amortizes it across error sets.
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, HTTPException

from ..bench import (
    CSV_COLUMNS,
    batch_time_curve,
    circuit_instance_seed,
    result_throughput,
    sweep,
)
from ..circuits import random_circuit
from ..engine import run_mode
from ..errors import SimulationError
from ..planner import PathCache
from .schemas import (
    BatchCurveRequest,
    BatchCurveResponse,
    CircuitModel,
    HealthResponse,
    RandomCircuitRequest,
    RunRequest,
    RunResponse,
    SweepRequest,
    SweepResponse,
)


def create_app(cache_file: str | None = None) -> FastAPI:
    """Build the service app.  `cache_file` persists planned contraction
    paths across server runs (loaded if present, saved on shutdown)."""
    cache = PathCache()
    if cache_file:
        try:
            with open(cache_file) as fp:
                cache = PathCache.load(fp)
        except FileNotFoundError:
            pass

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if cache_file:
            with open(cache_file, "w") as fp:
                app.state.path_cache.save(fp)

    app = FastAPI(
        title="ptsbe",
        description=(
            "Noisy quantum circuit sampling on tensor networks with "
            "pre-sampled trajectories and shared contraction paths."
        ),
        lifespan=lifespan,
    )
    app.state.path_cache = cache

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        cache: PathCache = app.state.path_cache
        return HealthResponse(
            status="ok",
            cached_paths=len(cache),
            cache_hits=cache.hits,
            cache_misses=cache.misses,
        )

    @app.post("/circuits/random", response_model=CircuitModel)
    def circuits_random(req: RandomCircuitRequest) -> CircuitModel:
        try:
            seed = circuit_instance_seed(req.seed, req.n, req.g, req.instance)
            c = random_circuit(
                req.n,
                req.g,
                two_qubit_fraction=req.two_qubit_fraction,
                p_range=req.p_range,
                rng=np.random.default_rng(seed),
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return CircuitModel.from_circuit(c)

    @app.post("/runs", response_model=RunResponse)
    def runs(req: RunRequest) -> RunResponse:
        try:
            c = req.circuit.to_circuit()
            config = req.config.to_config(n=c.n, g=len(c.gates))
            cache = app.state.path_cache if req.use_shared_cache else None
            result = run_mode(c, config, cache=cache)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except SimulationError as exc:
            raise HTTPException(status_code=409, detail=f"{type(exc).__name__}: {exc}")
        return RunResponse.from_result(result, result_throughput(result))

    @app.post("/sweeps", response_model=SweepResponse)
    def sweeps(req: SweepRequest) -> SweepResponse:
        try:
            template = req.config.to_config(n=req.ns[0], g=req.gs[0])
            template = replace(
                template,
                two_qubit_fraction=req.two_qubit_fraction,
                p_range=req.p_range,
                seed=req.seed,
            )
            circuits = [c.to_circuit() for c in req.circuits] if req.circuits else None
            if circuits is not None:
                per_point = len(circuits)
            else:
                per_point = req.circuits_per_point
            rows = sweep(
                template,
                ns=req.ns,
                gs=req.gs,
                modes=req.modes,
                circuits_per_point=per_point,
                circuits=circuits,
                point_workers=req.point_workers,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SweepResponse(rows=rows, columns=CSV_COLUMNS)

    @app.post("/batch-curve", response_model=BatchCurveResponse)
    def batch_curve(req: BatchCurveRequest) -> BatchCurveResponse:
        try:
            rows = batch_time_curve(
                req.circuit.to_circuit(),
                b_values=req.b_values,
                hypersamples=req.hypersamples,
                seed=req.seed,
                reps=req.reps,
            )
        except (ValueError, SimulationError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return BatchCurveResponse(rows=rows)

    return app
