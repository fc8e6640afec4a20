"""Pydantic request/response models for the simulation service.

These mirror the package's JSON formats one-to-one: the circuit wire format
`{n, gates:[{kind, targets, angle?, noise:{kind, p}}]}` and the run-result
format (records, timings, counters, config echo, seeds).
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..circuits import Circuit, Gate, NoiseChannel
from ..engine import MODES, RunConfig, RunResult


class NoiseModel(BaseModel):
    kind: str
    p: float


class GateModel(BaseModel):
    kind: str
    targets: list[int]
    angle: Optional[float] = None
    noise: NoiseModel


class CircuitModel(BaseModel):
    n: int
    gates: list[GateModel]

    @classmethod
    def from_circuit(cls, c: Circuit) -> "CircuitModel":
        return cls(
            n=c.n,
            gates=[
                GateModel(
                    kind=g.kind,
                    targets=list(g.targets),
                    angle=g.angle,
                    noise=NoiseModel(kind=g.noise.kind, p=g.noise.p),
                )
                for g in c.gates
            ],
        )

    def to_circuit(self) -> Circuit:
        return Circuit(
            n=self.n,
            gates=tuple(
                Gate(
                    kind=g.kind,
                    targets=tuple(g.targets),
                    angle=g.angle,
                    noise=NoiseChannel(kind=g.noise.kind, p=g.noise.p),
                )
                for g in self.gates
            ),
        )


class RandomCircuitRequest(BaseModel):
    n: int = Field(ge=2)
    g: int = Field(ge=1)
    two_qubit_fraction: float = 0.2
    p_range: tuple[float, float] = (0.02, 0.2)
    seed: int = 0
    instance: int = 0  # same keying as sweep pre-generation


class RunConfigModel(BaseModel):
    mode: str = "ptsbe-proportional"
    error_sets: int = 4
    total_shots: int = 64
    batch_sizes: Optional[list[int]] = None
    nonfinal_batch: int = 10
    final_batch: int = 28
    nonfinal_shots: int = 1
    final_mode: str = "exhaustive"
    tau: float = 1e-6
    direct_count: int = 1
    hypersamples: int = 100
    baseline_batch: int = 24
    baseline_hypersamples: int = 1
    seed: int = 0
    workers: int = 1
    max_intermediate: int = 2**26
    timeout_s: Optional[float] = 120.0

    def to_config(self, n: int, g: int) -> RunConfig:
        doc = self.model_dump()
        if doc["batch_sizes"] is not None:
            doc["batch_sizes"] = tuple(doc["batch_sizes"])
        if doc["mode"] not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        return RunConfig(n=n, g=g, **doc)


class RunRequest(BaseModel):
    circuit: CircuitModel
    config: RunConfigModel = RunConfigModel()
    use_shared_cache: bool = True


class ShotRecordModel(BaseModel):
    bitstring: str
    count: int
    prob: Optional[float] = None


class RunResponse(BaseModel):
    mode: str
    records: list[ShotRecordModel]
    unique_shots: int
    total_count: int
    timings: dict[str, float]
    plan_events: int
    contract_events: int
    stage_events: dict[int, int]
    stage_seconds: dict[int, float]
    config: dict
    seed: int
    shot_allocations: list[int]
    throughput: float

    @classmethod
    def from_result(cls, result: RunResult, tp: float) -> "RunResponse":
        return cls(
            mode=result.mode,
            records=[
                ShotRecordModel(bitstring=r.bitstring, count=r.count, prob=r.prob)
                for r in result.records
            ],
            unique_shots=result.unique_shots,
            total_count=result.total_count,
            timings=result.timings,
            plan_events=result.plan_events,
            contract_events=result.contract_events,
            stage_events=result.stage_events,
            stage_seconds=result.stage_seconds,
            config=result.config,
            seed=result.seed,
            shot_allocations=result.shot_allocations,
            throughput=tp,
        )


class SweepRequest(BaseModel):
    ns: list[int]
    gs: list[int]
    modes: list[str]
    circuits_per_point: int = 10
    two_qubit_fraction: float = 0.2
    p_range: tuple[float, float] = (0.02, 0.2)
    seed: int = 0
    config: RunConfigModel = RunConfigModel()
    circuits: Optional[list[CircuitModel]] = None
    point_workers: int = 1  # >1 distorts wall-clock throughput on shared cores


class SweepResponse(BaseModel):
    rows: list[dict]
    columns: list[str]


class BatchCurveRequest(BaseModel):
    circuit: CircuitModel
    b_values: list[int]
    hypersamples: int = 100
    seed: int = 0
    reps: int = 3


class BatchCurveResponse(BaseModel):
    rows: list[dict]


class HealthResponse(BaseModel):
    status: str
    cached_paths: int
    cache_hits: int
    cache_misses: int
