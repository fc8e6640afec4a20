"""Noisy quantum circuit sampling on tensor networks.

Error realizations are drawn up front, merged into a fixed network template
so one cached contraction path serves every realization, and measurement
bitstrings are harvested batch-wise so each unique prefix is contracted
exactly once.
"""

from .circuits import Circuit, Gate, NoiseChannel, build_network, gate_matrix, random_circuit
from .engine import (
    BatchPlan,
    CircuitNetwork,
    EngineStats,
    ErrorSet,
    RunConfig,
    RunResult,
    SamplerContext,
    ShotRecord,
    conditional_marginal,
    insert_errors,
    marginal_network,
    merge_errors,
    merge_records,
    presample_errors,
    run_mode,
    run_ptsbe,
    sample_baseline,
    sample_nonproportional,
    sample_proportional,
    sample_unoptimized_ptsbe,
    spawn_rng,
)
from .planner import (
    ContractionPath,
    PathCache,
    cache_lookup_or_plan,
    find_path_greedy,
    find_path_optimal,
    path_cost,
)
from .tensor import (
    Index,
    NetworkSignature,
    Tensor,
    TensorNetwork,
    contract_pair,
    execute_path,
    network_signature,
)

__all__ = [
    "BatchPlan",
    "Circuit",
    "CircuitNetwork",
    "ContractionPath",
    "EngineStats",
    "ErrorSet",
    "Gate",
    "Index",
    "NetworkSignature",
    "NoiseChannel",
    "PathCache",
    "RunConfig",
    "RunResult",
    "SamplerContext",
    "ShotRecord",
    "Tensor",
    "TensorNetwork",
    "build_network",
    "cache_lookup_or_plan",
    "conditional_marginal",
    "contract_pair",
    "execute_path",
    "find_path_greedy",
    "find_path_optimal",
    "gate_matrix",
    "insert_errors",
    "marginal_network",
    "merge_errors",
    "merge_records",
    "network_signature",
    "path_cost",
    "presample_errors",
    "random_circuit",
    "run_mode",
    "run_ptsbe",
    "sample_baseline",
    "sample_nonproportional",
    "sample_proportional",
    "sample_unoptimized_ptsbe",
    "spawn_rng",
]

__version__ = "0.1.0"
