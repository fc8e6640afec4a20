"""Trajectory engine: pre-sampled error realizations, error merging into a
fixed network template, batch-wise conditional sampling, and the two slower
comparison modes (per-shot trajectories, per-error-set path planning).

The pipeline plans one contraction path per batch stage on the error-free
template; every error realization shares those paths because merging an
error operator into its adjacent gate tensor changes entry values only,
never network structure.  Within one realization, each unique measurement
prefix is contracted exactly once per stage.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .circuits import (
    TWO_QUBIT_PAULIS,
    Circuit,
    build_network,
    final_qubit_labels,
    gate_matrix,
    pauli_matrix,
)
from .errors import (
    ImpossiblePrefixError,
    NetworkStructureError,
    NumericalError,
    ResourceLimitError,
    SimulationError,
)
from .planner import PathCache, cache_lookup_or_plan, find_path_greedy
from .tensor import (
    DEFAULT_INTERMEDIATE_CEILING,
    Index,
    Tensor,
    TensorNetwork,
    execute_path,
)

_KET0 = np.array([1.0, 0.0], dtype=np.complex128)
_KET1 = np.array([0.0, 1.0], dtype=np.complex128)
_COPY3 = np.zeros((2, 2, 2), dtype=np.complex128)
_COPY3[0, 0, 0] = 1.0
_COPY3[1, 1, 1] = 1.0

NEGATIVE_DIAG_TOLERANCE = -1e-12
VANISHING_MASS = 1e-12


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-mode stream splitting: independent generator per key path."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass(frozen=True)
class ErrorSet:
    """One pre-sampled noise realization: a realized operator label per gate
    site ("I"/"II" = no error) plus the shot allocation for this set."""

    id: int
    realized: tuple[str, ...]
    m: int

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("shot allocation must be non-negative")


@dataclass(frozen=True)
class BatchPlan:
    """Qubit batching for staged sampling.

    `sizes` partitions the qubits in order; stage j measures the next
    sizes[j-1] qubits conditioned on all earlier stages.  Non-proportional
    runs branch each prefix into up to `nonfinal_shots` children per
    non-final stage and harvest the final stage either by direct draws
    (`direct_count` outcomes) or exhaustively (every outcome with
    conditional probability >= `threshold`).
    """

    sizes: tuple[int, ...]
    nonfinal_shots: int = 1
    final_mode: str = "exhaustive"
    direct_count: int = 1
    threshold: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(b) for b in self.sizes))
        if len(self.sizes) < 1 or any(b < 1 for b in self.sizes):
            raise ValueError(f"batch sizes must be positive, got {self.sizes}")
        if self.final_mode not in ("direct", "exhaustive"):
            raise ValueError(f"unknown final mode {self.final_mode!r}")
        if self.direct_count < 1:
            raise ValueError("direct count must be >= 1")
        # threshold > 1 is allowed and simply yields empty exhaustive sets
        if self.threshold <= 0.0:
            raise ValueError("exhaustive threshold must be positive")
        if self.nonfinal_shots < 1:
            raise ValueError("nonfinal_shots must be >= 1")

    @property
    def f(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def offset(self, j: int) -> int:
        return sum(self.sizes[: j - 1])

    def stage_qubits(self, j: int) -> range:
        start = self.offset(j)
        return range(start, start + self.sizes[j - 1])

    @classmethod
    def fixed(cls, n: int, b: int, **kw) -> "BatchPlan":
        """Batches of size b with the remainder (n mod b) as the final batch,
        e.g. n=50, b=24 -> (24, 24, 2)."""
        if b < 1:
            raise ValueError("batch size must be >= 1")
        f = max(1, math.ceil(n / b))
        sizes = [b] * (f - 1)
        sizes.append(n - b * (f - 1))
        return cls(sizes=tuple(sizes), **kw)

    @classmethod
    def with_final(cls, n: int, nonfinal: int = 10, final: int = 28, **kw) -> "BatchPlan":
        """Non-final batches of `nonfinal` qubits feeding one large final
        batch of min(final, n) qubits."""
        final_b = min(final, n)
        rem = n - final_b
        k, r = divmod(rem, nonfinal)
        sizes = [nonfinal] * k + ([r] if r else []) + [final_b]
        return cls(sizes=tuple(sizes), **kw)


@dataclass
class ShotRecord:
    """A measured bitstring with its multiplicity; exhaustive sampling also
    reports the conditional probability that admitted it."""

    bitstring: str
    count: int
    prob: Optional[float] = None


@dataclass
class EngineStats:
    """Instrumentation: path-plan and contraction event counts plus wall
    times, broken down per batch stage."""

    plan_events: int = 0
    contract_events: int = 0
    path_seconds: float = 0.0
    contract_seconds: float = 0.0
    stage_events: dict = field(default_factory=dict)
    stage_seconds: dict = field(default_factory=dict)

    def record_contraction(self, stage: int, seconds: float) -> None:
        self.contract_events += 1
        self.contract_seconds += seconds
        self.stage_events[stage] = self.stage_events.get(stage, 0) + 1
        self.stage_seconds[stage] = self.stage_seconds.get(stage, 0.0) + seconds

    def merge(self, other: "EngineStats") -> None:
        self.plan_events += other.plan_events
        self.contract_events += other.contract_events
        self.path_seconds += other.path_seconds
        self.contract_seconds += other.contract_seconds
        for k, v in other.stage_events.items():
            self.stage_events[k] = self.stage_events.get(k, 0) + v
        for k, v in other.stage_seconds.items():
            self.stage_seconds[k] = self.stage_seconds.get(k, 0.0) + v


@dataclass
class SamplerContext:
    """Shared execution state for one run: path cache, counters, planner
    settings and resource guards."""

    cache: PathCache = field(default_factory=PathCache)
    stats: EngineStats = field(default_factory=EngineStats)
    hypersamples: int = 100
    planner_seed: int = 0
    max_intermediate: int = DEFAULT_INTERMEDIATE_CEILING
    deadline: Optional[float] = None

    def check_deadline(self) -> None:
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise ResourceLimitError("wall-clock deadline exceeded")

    def fork(self) -> "SamplerContext":
        """Same cache and guards, private counters (for worker lanes)."""
        return SamplerContext(
            cache=self.cache,
            stats=EngineStats(),
            hypersamples=self.hypersamples,
            planner_seed=self.planner_seed,
            max_intermediate=self.max_intermediate,
            deadline=self.deadline,
        )


@dataclass(frozen=True)
class CircuitNetwork:
    """A circuit's uncontracted network plus its per-qubit final labels (the
    open-leg order that TensorNetwork's label set cannot carry)."""

    net: TensorNetwork
    final_labels: tuple[int, ...]

    @classmethod
    def from_circuit(cls, c: Circuit) -> "CircuitNetwork":
        return cls(net=build_network(c), final_labels=final_qubit_labels(c))

    @property
    def n(self) -> int:
        return len(self.final_labels)

    def merged(self, k: ErrorSet) -> "CircuitNetwork":
        return CircuitNetwork(net=merge_errors(self.net, k), final_labels=self.final_labels)


def draw_realization(c: Circuit, rng: np.random.Generator) -> tuple[str, ...]:
    """One realized operator label per gate site, drawn from each channel."""
    out = []
    for g in c.gates:
        ch = g.noise
        if rng.random() < ch.p:
            if ch.kind == "depolarizing":
                out.append(TWO_QUBIT_PAULIS[int(rng.integers(15))])
            else:
                out.append(ch.kind)
        else:
            out.append(ch.identity_label())
    return tuple(out)


def presample_errors(
    c: Circuit,
    e: int,
    rule: str = "proportional",
    total_shots: int = 0,
    rng: Optional[np.random.Generator] = None,
    shots_per_set: Optional[Sequence[int] | int] = None,
) -> list[ErrorSet]:
    """Draw `e` error realizations up front and allocate shots to them.

    rule="proportional": m_i = total_shots / e with the remainder spread
    over the first sets.  rule="uniform": m_i comes from `shots_per_set`
    (an int for all sets, or one value per set).
    """
    if e < 1:
        raise ValueError("need at least one error set")
    if rng is None:
        rng = np.random.default_rng()
    if rule == "proportional":
        if total_shots < e:
            raise ValueError("proportional rule needs total_shots >= number of sets")
        base, rem = divmod(total_shots, e)
        alloc = [base + 1 if i < rem else base for i in range(e)]
    elif rule == "uniform":
        if shots_per_set is None:
            raise ValueError("uniform rule needs shots_per_set")
        if isinstance(shots_per_set, int):
            alloc = [shots_per_set] * e
        else:
            alloc = list(shots_per_set)
            if len(alloc) != e:
                raise ValueError("shots_per_set length must equal number of sets")
    else:
        raise ValueError(f"unknown allocation rule {rule!r}")
    return [ErrorSet(id=i, realized=draw_realization(c, rng), m=alloc[i]) for i in range(e)]


def merge_errors(template: TensorNetwork, k: ErrorSet) -> TensorNetwork:
    """Fold each realized error operator into its gate operand (error fires
    after the gate), leaving network structure untouched: the result shares
    the template's signature, so it replays the template's cached paths."""
    g = len(k.realized)
    n = len(template.operands) - g
    if n < 1:
        raise NetworkStructureError(
            f"realization has {g} sites but network has {len(template.operands)} operands"
        )
    operands = list(template.operands)
    for site, realized in enumerate(k.realized):
        if set(realized) == {"I"}:
            continue
        slot = n + site
        old = operands[slot]
        if len(realized) == 1:
            if old.data.ndim != 2:
                raise NetworkStructureError(
                    f"site {site}: 1-qubit error on {old.data.ndim // 2}-qubit gate"
                )
            data = pauli_matrix(realized) @ old.data
        else:
            if old.data.ndim != 4:
                raise NetworkStructureError(
                    f"site {site}: 2-qubit error on {old.data.ndim // 2}-qubit gate"
                )
            data = (pauli_matrix(realized) @ old.data.reshape(4, 4)).reshape(2, 2, 2, 2)
        operands[slot] = Tensor(old.indices, data)
    return TensorNetwork(operands, template.open_indices)


def insert_errors(c: Circuit, k: ErrorSet) -> CircuitNetwork:
    """Build the circuit network with realized errors as separate operands
    spliced onto the wires after their gates.  Topology depends on the
    realization; this is the construction the comparison modes replan for."""
    if len(k.realized) != len(c.gates):
        raise NetworkStructureError("realization length does not match gate count")
    current = list(range(c.n))
    nxt = c.n
    operands = [Tensor([Index(q, 2)], _KET0) for q in range(c.n)]
    for g, realized in zip(c.gates, k.realized):
        u = gate_matrix(g)
        if g.arity == 1:
            q = g.targets[0]
            out = nxt
            nxt += 1
            operands.append(Tensor([Index(out, 2), Index(current[q], 2)], u))
            current[q] = out
        else:
            qc, qt = g.targets
            oc, ot = nxt, nxt + 1
            nxt += 2
            operands.append(
                Tensor(
                    [Index(oc, 2), Index(ot, 2), Index(current[qc], 2), Index(current[qt], 2)],
                    u.reshape(2, 2, 2, 2),
                )
            )
            current[qc], current[qt] = oc, ot
        for ch, q in zip(realized, g.targets):
            if ch == "I":
                continue
            out = nxt
            nxt += 1
            operands.append(Tensor([Index(out, 2), Index(current[q], 2)], pauli_matrix(ch)))
            current[q] = out
    return CircuitNetwork(
        net=TensorNetwork(operands, current), final_labels=tuple(current)
    )


class MarginalNetwork(NamedTuple):
    net: TensorNetwork
    open_labels: tuple[int, ...]  # one per batch qubit, in qubit order


def marginal_network(
    cnet: CircuitNetwork, plan: BatchPlan, j: int, prefix: str
) -> MarginalNetwork:
    """Sandwich of the network with its conjugate for batch stage j.

    Prefix qubits' ket and bra legs are fixed to basis vectors per the
    prefix bits; each batch qubit's ket/bra pair feeds a 3-leg copy tensor
    whose third leg stays open (so the contraction yields the diagonal of
    the conditional sandwich directly, a 2^{b_j} population vector rather
    than the full 2^{b_j} x 2^{b_j} matrix); later qubits' ket legs are
    traced against their bra legs.
    """
    n = cnet.n
    if not 1 <= j <= plan.f:
        raise ValueError(f"stage {j} outside 1..{plan.f}")
    offset = plan.offset(j)
    if len(prefix) != offset:
        raise ValueError(f"stage {j} expects a {offset}-bit prefix, got {len(prefix)}")
    batch = plan.stage_qubits(j)
    fresh = 1 + max(
        (ix.label for t in cnet.net.operands for ix in t.indices), default=0
    )
    bra_map = {}
    for t in cnet.net.operands:
        for ix in t.indices:
            if ix.label not in bra_map:
                bra_map[ix.label] = fresh
                fresh += 1
    for q in range(batch.stop, n):  # traced: bra leg joins the ket leg
        bra_map[cnet.final_labels[q]] = cnet.final_labels[q]

    operands = list(cnet.net.operands)
    operands.extend(t.conj().relabeled(bra_map) for t in cnet.net.operands)
    opens = []
    for q in range(offset):
        vec = _KET1 if prefix[q] == "1" else _KET0
        ket_leg = cnet.final_labels[q]
        operands.append(Tensor([Index(ket_leg, 2)], vec))
        operands.append(Tensor([Index(bra_map[ket_leg], 2)], vec))
    for q in batch:
        ket_leg = cnet.final_labels[q]
        operands.append(
            Tensor([Index(ket_leg, 2), Index(bra_map[ket_leg], 2), Index(fresh, 2)], _COPY3)
        )
        opens.append(fresh)
        fresh += 1
    return MarginalNetwork(net=TensorNetwork(operands, opens), open_labels=tuple(opens))


# spawn-key namespaces so no two rng streams can collide
_KEY_PRESAMPLE = 0
_KEY_SAMPLER = 1
_KEY_BASELINE = 2
_KEY_PLANNER = 3


def _contract_marginal(
    mnet: MarginalNetwork,
    ctx: SamplerContext,
    j: int,
    path=None,
) -> tuple[np.ndarray, float]:
    """Execute one stage contraction; returns (clamped unnormalized
    population vector, its mass).  Uses the stage path from the cache unless
    an explicit path is supplied."""
    ctx.check_deadline()
    if path is None:
        t0 = time.perf_counter()
        path, hit = cache_lookup_or_plan(
            ctx.cache,
            mnet.net,
            stage=j,
            hypersamples=ctx.hypersamples,
            rng=spawn_rng(ctx.planner_seed, _KEY_PLANNER, j),
        )
        dt = time.perf_counter() - t0
        if not hit:
            ctx.stats.plan_events += 1
            ctx.stats.path_seconds += dt
    t0 = time.perf_counter()
    result = execute_path(mnet.net, path, max_intermediate_entries=ctx.max_intermediate)
    vec = result.transposed(mnet.open_labels).data.reshape(-1)
    dt = time.perf_counter() - t0
    ctx.stats.record_contraction(j, dt)
    probs = np.real(vec)
    worst = probs.min() if probs.size else 0.0
    if worst < NEGATIVE_DIAG_TOLERANCE:
        raise NumericalError(f"marginal diagonal entry {worst} below {NEGATIVE_DIAG_TOLERANCE}")
    probs = np.clip(probs, 0.0, None)
    return probs, float(probs.sum())


def conditional_marginal(
    cnet: CircuitNetwork,
    cache: PathCache,
    plan: BatchPlan,
    j: int,
    prefix: str,
    *,
    hypersamples: int = 100,
    planner_seed: int = 0,
    stats: Optional[EngineStats] = None,
    max_intermediate: int = DEFAULT_INTERMEDIATE_CEILING,
) -> np.ndarray:
    """Normalized conditional distribution over the 2^{b_j} outcomes of
    batch stage j given the measured prefix."""
    ctx = SamplerContext(
        cache=cache,
        stats=stats if stats is not None else EngineStats(),
        hypersamples=hypersamples,
        planner_seed=planner_seed,
        max_intermediate=max_intermediate,
    )
    probs, mass = _contract_marginal(marginal_network(cnet, plan, j, prefix), ctx, j)
    if mass < VANISHING_MASS:
        raise ImpossiblePrefixError(f"prefix {prefix!r} has vanishing mass {mass}")
    return probs / mass


def _stage_distribution(
    cnet: CircuitNetwork, ctx: SamplerContext, plan: BatchPlan, j: int, prefix: str, path=None
) -> np.ndarray:
    probs, mass = _contract_marginal(marginal_network(cnet, plan, j, prefix), ctx, j, path)
    if mass < VANISHING_MASS:
        raise ImpossiblePrefixError(f"prefix {prefix!r} has vanishing mass {mass}")
    return probs / mass


def _bits(idx: int, width: int) -> str:
    return format(idx, f"0{width}b")


def sample_proportional(
    template: CircuitNetwork,
    k: ErrorSet,
    plan: BatchPlan,
    rng: np.random.Generator,
    ctx: Optional[SamplerContext] = None,
) -> list[ShotRecord]:
    """Born-rule sampling of m_i shots for one error realization.

    Stage 1 contracts once and splits all m_i shots multinomially; later
    stages contract once per unique surviving prefix and split that prefix's
    multiplicity.  Total contractions = sum over stages of unique prefixes,
    never more than m_i * f.
    """
    if ctx is None:
        ctx = SamplerContext()
    if k.m < 1:
        raise ValueError("proportional sampling needs m >= 1")
    merged = template.merged(k)
    groups: dict[str, int] = {"": k.m}
    for j in range(1, plan.f + 1):
        width = plan.sizes[j - 1]
        nxt: dict[str, int] = {}
        for prefix in sorted(groups):
            mult = groups[prefix]
            probs = _stage_distribution(merged, ctx, plan, j, prefix)
            counts = rng.multinomial(mult, probs / probs.sum())
            for idx in np.flatnonzero(counts):
                child = prefix + _bits(int(idx), width)
                nxt[child] = nxt.get(child, 0) + int(counts[idx])
        groups = nxt
    return [ShotRecord(bitstring=s, count=c) for s, c in sorted(groups.items())]


def sample_nonproportional(
    template: CircuitNetwork,
    k: ErrorSet,
    plan: BatchPlan,
    rng: np.random.Generator,
    ctx: Optional[SamplerContext] = None,
) -> list[ShotRecord]:
    """Data-harvesting sampling: each non-final stage branches every prefix
    into up to plan.nonfinal_shots distinct children (weighted draw without
    replacement among positive-probability outcomes); the final stage either
    draws plan.direct_count outcomes or exhaustively emits every outcome
    whose conditional probability reaches plan.threshold, tagged with that
    probability."""
    if ctx is None:
        ctx = SamplerContext()
    merged = template.merged(k)
    prefixes = [""]
    for j in range(1, plan.f):
        width = plan.sizes[j - 1]
        nxt = []
        for prefix in prefixes:
            probs = _stage_distribution(merged, ctx, plan, j, prefix)
            positive = np.flatnonzero(probs > 0.0)
            take = min(plan.nonfinal_shots, positive.size)
            if take == 0:
                continue
            weights = probs[positive] / probs[positive].sum()
            chosen = rng.choice(positive, size=take, replace=False, p=weights)
            nxt.extend(prefix + _bits(int(idx), width) for idx in sorted(chosen.tolist()))
        prefixes = nxt
    records: list[ShotRecord] = []
    width = plan.sizes[-1]
    for prefix in prefixes:
        probs = _stage_distribution(merged, ctx, plan, plan.f, prefix)
        if plan.final_mode == "exhaustive":
            for idx in np.flatnonzero(probs >= plan.threshold):
                records.append(
                    ShotRecord(
                        bitstring=prefix + _bits(int(idx), width),
                        count=1,
                        prob=float(probs[idx]),
                    )
                )
        else:
            counts = rng.multinomial(plan.direct_count, probs / probs.sum())
            for idx in np.flatnonzero(counts):
                records.append(
                    ShotRecord(bitstring=prefix + _bits(int(idx), width), count=int(counts[idx]))
                )
    return records


def sample_baseline(
    c: Circuit,
    m: int,
    b: int = 24,
    rng: Optional[np.random.Generator] = None,
    hypersamples: int = 1,
    ctx: Optional[SamplerContext] = None,
) -> list[ShotRecord]:
    """Traditional per-shot trajectories: every shot draws a fresh error
    realization, rebuilds the network with inserted error operands, replans
    every stage path from scratch, and harvests a single bitstring.  Plan
    and contraction counters both land at m * f by construction."""
    if m < 1:
        raise ValueError("baseline needs m >= 1")
    if rng is None:
        rng = np.random.default_rng()
    if ctx is None:
        ctx = SamplerContext()
    plan = BatchPlan.fixed(c.n, b)
    tally: dict[str, int] = {}
    for shot in range(m):
        realized = draw_realization(c, rng)
        cnet = insert_errors(c, ErrorSet(id=shot, realized=realized, m=1))
        prefix = ""
        for j in range(1, plan.f + 1):
            mnet = marginal_network(cnet, plan, j, prefix)
            t0 = time.perf_counter()
            path = find_path_greedy(
                mnet.net, hypersamples=hypersamples, rng=spawn_rng(ctx.planner_seed, _KEY_PLANNER, shot, j)
            )
            ctx.stats.plan_events += 1
            ctx.stats.path_seconds += time.perf_counter() - t0
            probs, mass = _contract_marginal(mnet, ctx, j, path=path)
            if mass < VANISHING_MASS:
                raise ImpossiblePrefixError(f"prefix {prefix!r} has vanishing mass")
            idx = int(rng.choice(probs.size, p=probs / mass))
            prefix += _bits(idx, plan.sizes[j - 1])
        tally[prefix] = tally.get(prefix, 0) + 1
    return [ShotRecord(bitstring=s, count=cnt) for s, cnt in sorted(tally.items())]


def sample_unoptimized_ptsbe(
    c: Circuit,
    errorsets: Sequence[ErrorSet],
    plan: BatchPlan,
    rng: Optional[np.random.Generator] = None,
    hypersamples: int = 100,
    ctx: Optional[SamplerContext] = None,
    seed: int = 0,
) -> list[ShotRecord]:
    """Comparison mode: errors are pre-sampled, but each realization keeps
    its own inserted-error topology, so paths are planned once per error set
    (E * f plan events) and every shot walks all stages one at a time
    (sum(m_i) * f contractions)."""
    if rng is None:
        rng = np.random.default_rng()
    if ctx is None:
        ctx = SamplerContext(hypersamples=hypersamples)
    tally: dict[str, int] = {}
    for k in errorsets:
        cnet = insert_errors(c, k)
        paths = []
        for j in range(1, plan.f + 1):
            mnet = marginal_network(cnet, plan, j, "0" * plan.offset(j))
            t0 = time.perf_counter()
            paths.append(
                find_path_greedy(
                    mnet.net, hypersamples=hypersamples, rng=spawn_rng(seed, _KEY_PLANNER, k.id, j)
                )
            )
            ctx.stats.plan_events += 1
            ctx.stats.path_seconds += time.perf_counter() - t0
        for _ in range(k.m):
            prefix = ""
            for j in range(1, plan.f + 1):
                mnet = marginal_network(cnet, plan, j, prefix)
                probs, mass = _contract_marginal(mnet, ctx, j, path=paths[j - 1])
                if mass < VANISHING_MASS:
                    raise ImpossiblePrefixError(f"prefix {prefix!r} has vanishing mass")
                idx = int(rng.choice(probs.size, p=probs / mass))
                prefix += _bits(idx, plan.sizes[j - 1])
            tally[prefix] = tally.get(prefix, 0) + 1
    return [ShotRecord(bitstring=s, count=cnt) for s, cnt in sorted(tally.items())]


MODES = ("ptsbe-proportional", "ptsbe-nonproportional", "unoptimized-ptsbe", "baseline")


@dataclass
class RunConfig:
    """Everything a run needs, echoed verbatim into results so any run can
    be reproduced from its output row."""

    n: int
    g: int
    mode: str = "ptsbe-proportional"
    two_qubit_fraction: float = 0.2
    p_range: tuple[float, float] = (0.02, 0.2)
    error_sets: int = 4
    total_shots: int = 64
    batch_sizes: Optional[tuple[int, ...]] = None  # None -> nonfinal 10 / final 28
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
    max_intermediate: int = DEFAULT_INTERMEDIATE_CEILING
    timeout_s: Optional[float] = 120.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_sizes is not None:
            self.batch_sizes = tuple(int(b) for b in self.batch_sizes)
            if sum(self.batch_sizes) != self.n:
                raise ValueError(
                    f"batch sizes {self.batch_sizes} must sum to n={self.n}"
                )

    def plan(self) -> BatchPlan:
        kw = dict(
            nonfinal_shots=self.nonfinal_shots,
            final_mode=self.final_mode,
            direct_count=self.direct_count,
            threshold=self.tau,
        )
        if self.batch_sizes is not None:
            return BatchPlan(sizes=self.batch_sizes, **kw)
        return BatchPlan.with_final(self.n, self.nonfinal_batch, self.final_batch, **kw)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "g": self.g,
            "mode": self.mode,
            "two_qubit_fraction": self.two_qubit_fraction,
            "p_range": list(self.p_range),
            "error_sets": self.error_sets,
            "total_shots": self.total_shots,
            "batch_sizes": list(self.batch_sizes) if self.batch_sizes else None,
            "nonfinal_batch": self.nonfinal_batch,
            "final_batch": self.final_batch,
            "nonfinal_shots": self.nonfinal_shots,
            "final_mode": self.final_mode,
            "tau": self.tau,
            "direct_count": self.direct_count,
            "hypersamples": self.hypersamples,
            "baseline_batch": self.baseline_batch,
            "baseline_hypersamples": self.baseline_hypersamples,
            "seed": self.seed,
            "workers": self.workers,
            "max_intermediate": self.max_intermediate,
            "timeout_s": self.timeout_s,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        if doc.get("p_range") is not None:
            doc["p_range"] = tuple(doc["p_range"])
        if doc.get("batch_sizes") is not None:
            doc["batch_sizes"] = tuple(doc["batch_sizes"])
        return cls(**doc)


@dataclass
class RunResult:
    """Run output: aggregated shot records plus the instrumentation needed
    for throughput accounting (phase timings, plan/contract counters)."""

    mode: str
    records: list[ShotRecord]
    unique_shots: int
    total_count: int
    timings: dict
    plan_events: int
    contract_events: int
    stage_events: dict
    stage_seconds: dict
    config: dict
    seed: int
    shot_allocations: list[int]

    @property
    def loop_seconds(self) -> float:
        return self.timings["loop_s"]

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "records": [
                    {"bitstring": r.bitstring, "count": r.count, "prob": r.prob}
                    for r in self.records
                ],
                "unique_shots": self.unique_shots,
                "total_count": self.total_count,
                "timings": self.timings,
                "plan_events": self.plan_events,
                "contract_events": self.contract_events,
                "stage_events": {str(k): v for k, v in self.stage_events.items()},
                "stage_seconds": {str(k): v for k, v in self.stage_seconds.items()},
                "config": self.config,
                "seed": self.seed,
                "shot_allocations": self.shot_allocations,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RunResult":
        doc = json.loads(text)
        return cls(
            mode=doc["mode"],
            records=[
                ShotRecord(bitstring=r["bitstring"], count=r["count"], prob=r.get("prob"))
                for r in doc["records"]
            ],
            unique_shots=doc["unique_shots"],
            total_count=doc["total_count"],
            timings=doc["timings"],
            plan_events=doc["plan_events"],
            contract_events=doc["contract_events"],
            stage_events={int(k): v for k, v in doc["stage_events"].items()},
            stage_seconds={int(k): v for k, v in doc["stage_seconds"].items()},
            config=doc["config"],
            seed=doc["seed"],
            shot_allocations=doc["shot_allocations"],
        )


def merge_records(per_set: Sequence[Sequence[ShotRecord]]) -> list[ShotRecord]:
    """Order-independent aggregation: counts summed per bitstring; the prob
    tag survives only when every contributor agrees on it."""
    counts: dict[str, int] = {}
    probs: dict[str, Optional[float]] = {}
    for records in per_set:
        for r in records:
            counts[r.bitstring] = counts.get(r.bitstring, 0) + r.count
            if r.bitstring not in probs:
                probs[r.bitstring] = r.prob
            elif probs[r.bitstring] != r.prob:
                probs[r.bitstring] = None
    return [
        ShotRecord(bitstring=s, count=c, prob=probs[s]) for s, c in sorted(counts.items())
    ]


def run_ptsbe(c: Circuit, config: RunConfig, cache: Optional[PathCache] = None) -> RunResult:
    """Full optimized pipeline: pre-sample error sets, plan the per-stage
    paths once on the error-free template, then process error sets
    independently (parallel up to `config.workers` lanes) against the shared
    path cache.  Plan events land at exactly f regardless of E and m.

    Passing `cache` reuses paths across runs (a warm cache skips planning
    entirely when the circuit structure and staging are unchanged)."""
    if config.mode not in ("ptsbe-proportional", "ptsbe-nonproportional"):
        raise ValueError(f"run_ptsbe handles optimized modes only, got {config.mode!r}")
    plan = config.plan()
    if plan.n != c.n:
        raise ValueError(f"plan covers {plan.n} qubits, circuit has {c.n}")
    ctx = SamplerContext(
        cache=cache if cache is not None else PathCache(),
        hypersamples=config.hypersamples,
        planner_seed=config.seed,
        max_intermediate=config.max_intermediate,
        deadline=(time.perf_counter() + config.timeout_s) if config.timeout_s else None,
    )

    t0 = time.perf_counter()
    template = CircuitNetwork.from_circuit(c)
    errorsets = presample_errors(
        c,
        config.error_sets,
        rule="proportional",
        total_shots=config.total_shots,
        rng=spawn_rng(config.seed, _KEY_PRESAMPLE),
    )
    generate_s = time.perf_counter() - t0

    # warm the per-stage paths on the template: after this, every error set
    # and every prefix replays cached paths
    t0 = time.perf_counter()
    for j in range(1, plan.f + 1):
        mnet = marginal_network(template, plan, j, "0" * plan.offset(j))
        _, hit = cache_lookup_or_plan(
            ctx.cache,
            mnet.net,
            stage=j,
            hypersamples=ctx.hypersamples,
            rng=spawn_rng(ctx.planner_seed, _KEY_PLANNER, j),
        )
        if not hit:
            ctx.stats.plan_events += 1
    plan_s = time.perf_counter() - t0
    ctx.stats.path_seconds += plan_s

    sampler = (
        sample_proportional if config.mode == "ptsbe-proportional" else sample_nonproportional
    )

    def one_set(k: ErrorSet):
        lane = ctx.fork()
        try:
            records = sampler(
                template, k, plan, spawn_rng(config.seed, _KEY_SAMPLER, k.id), lane
            )
        except SimulationError as exc:
            raise type(exc)(f"error set {k.id}: {exc}") from exc
        return records, lane.stats

    t0 = time.perf_counter()
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(one_set, errorsets))
    else:
        outcomes = [one_set(k) for k in errorsets]
    loop_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    for _, lane_stats in outcomes:
        ctx.stats.merge(lane_stats)
    records = merge_records([recs for recs, _ in outcomes])
    aggregate_s = time.perf_counter() - t0

    return RunResult(
        mode=config.mode,
        records=records,
        unique_shots=len(records),
        total_count=sum(r.count for r in records),
        timings={
            "generate_s": generate_s,
            "plan_s": plan_s,
            "loop_s": loop_s,
            "aggregate_s": aggregate_s,
            "path_s": ctx.stats.path_seconds,
            "contract_s": ctx.stats.contract_seconds,
        },
        plan_events=ctx.stats.plan_events,
        contract_events=ctx.stats.contract_events,
        stage_events=dict(sorted(ctx.stats.stage_events.items())),
        stage_seconds=dict(sorted(ctx.stats.stage_seconds.items())),
        config=config.to_dict(),
        seed=config.seed,
        shot_allocations=[k.m for k in errorsets],
    )


def run_mode(c: Circuit, config: RunConfig, cache: Optional[PathCache] = None) -> RunResult:
    """Dispatch a run in any of the four modes, returning a uniform result.

    For the optimized modes, loop time excludes path planning (paths are
    cached once up front); the baseline replans inside its loop by
    definition, so its loop time includes planning.  `cache` is honored by
    the optimized modes only: the comparison modes replan by contract.
    """
    if config.mode in ("ptsbe-proportional", "ptsbe-nonproportional"):
        return run_ptsbe(c, config, cache=cache)

    ctx = SamplerContext(
        hypersamples=config.hypersamples,
        planner_seed=config.seed,
        max_intermediate=config.max_intermediate,
        deadline=(time.perf_counter() + config.timeout_s) if config.timeout_s else None,
    )
    t0 = time.perf_counter()
    if config.mode == "baseline":
        records = sample_baseline(
            c,
            m=config.total_shots,
            b=config.baseline_batch,
            rng=spawn_rng(config.seed, _KEY_BASELINE),
            hypersamples=config.baseline_hypersamples,
            ctx=ctx,
        )
        loop_s = time.perf_counter() - t0  # includes per-shot replanning
        plan_s = 0.0
        allocations = [1] * config.total_shots
    else:  # unoptimized-ptsbe
        plan = config.plan()
        errorsets = presample_errors(
            c,
            config.error_sets,
            rule="proportional",
            total_shots=config.total_shots,
            rng=spawn_rng(config.seed, _KEY_PRESAMPLE),
        )
        records = sample_unoptimized_ptsbe(
            c,
            errorsets,
            plan,
            rng=spawn_rng(config.seed, _KEY_SAMPLER),
            hypersamples=config.hypersamples,
            ctx=ctx,
            seed=config.seed,
        )
        loop_s = time.perf_counter() - t0 - ctx.stats.path_seconds
        plan_s = ctx.stats.path_seconds
        allocations = [k.m for k in errorsets]
    return RunResult(
        mode=config.mode,
        records=records,
        unique_shots=len(records),
        total_count=sum(r.count for r in records),
        timings={
            "generate_s": 0.0,
            "plan_s": plan_s,
            "loop_s": loop_s,
            "aggregate_s": 0.0,
            "path_s": ctx.stats.path_seconds,
            "contract_s": ctx.stats.contract_seconds,
        },
        plan_events=ctx.stats.plan_events,
        contract_events=ctx.stats.contract_events,
        stage_events=dict(sorted(ctx.stats.stage_events.items())),
        stage_seconds=dict(sorted(ctx.stats.stage_seconds.items())),
        config=config.to_dict(),
        seed=config.seed,
        shot_allocations=allocations,
    )
