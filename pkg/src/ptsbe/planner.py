"""Contraction-path search, cost model, and the signature-keyed path cache.

The greedy planner repeats a cheap pairwise search `hypersamples` times with
randomized tie-breaking and Boltzmann-perturbed scores, keeping the lowest
flop estimate.  The optimal planner is a dynamic program over operand
subsets, used as a verification oracle at small operand counts.

Cached paths are keyed by `NetworkSignature` plus a batch-stage descriptor:
any network sharing the signature replays the stored path unchanged, which
is what lets every error realization of one circuit reuse the paths planned
once on the error-free template.
"""

from __future__ import annotations

import heapq
import json
import math
import threading
from dataclasses import dataclass
from typing import Hashable, Optional

import numpy as np

from .errors import (
    CapacityError,
    IncompletePathError,
    NetworkStructureError,
    PathCacheError,
)
from .tensor import NetworkSignature, TensorNetwork, network_signature


@dataclass(frozen=True)
class ContractionPath:
    """Ordered pairwise merge schedule plus its flop estimate.

    Step (i, j) with i < j contracts slots i and j; the result replaces the
    lower slot and the higher slot is removed (higher slots shift down).
    """

    steps: tuple[tuple[int, int], ...]
    est_cost: float

    def to_json(self) -> str:
        return json.dumps({"steps": [list(s) for s in self.steps], "est_cost": self.est_cost})

    @classmethod
    def from_json(cls, text: str) -> "ContractionPath":
        doc = json.loads(text)
        return cls(
            steps=tuple((int(i), int(j)) for i, j in doc["steps"]),
            est_cost=float(doc["est_cost"]),
        )


def _slot_dims(net: TensorNetwork) -> list[dict[int, int]]:
    return [{ix.label: ix.dim for ix in t.indices} for t in net.operands]


def _structural_replay(net: TensorNetwork, steps) -> float:
    """Replay steps on shapes only; returns total flop estimate.

    Raises NetworkStructureError / IncompletePathError exactly where a real
    execution would fail structurally.
    """
    slots = _slot_dims(net)
    cost = 0.0
    for step in steps:
        i, j = step
        if i > j:
            i, j = j, i
        if i == j or i < 0 or j >= len(slots):
            raise NetworkStructureError(f"invalid step {step} with {len(slots)} slots")
        a, b = slots[i], slots[j]
        union = 1.0
        merged = {}
        for lb, d in a.items():
            union *= d
            merged[lb] = d
        for lb, d in b.items():
            if lb in merged:
                if merged[lb] != d:
                    raise NetworkStructureError(f"label {lb} dim mismatch in replay")
                del merged[lb]  # contracted away
            else:
                union *= d
                merged[lb] = d
        cost += union
        slots[i] = merged
        del slots[j]
    if len(slots) != 1:
        raise IncompletePathError(f"path left {len(slots)} operands, expected 1")
    if set(slots[0]) != set(net.open_indices):
        raise NetworkStructureError("replayed path does not produce the open indices")
    return cost


def path_cost(net: TensorNetwork, path) -> float:
    """Flop estimate of `path` on `net`: sum over steps of the product of
    dims of the union of both operands' indices."""
    steps = getattr(path, "steps", path)
    return _structural_replay(net, steps)


def _stable_merges_to_steps(n: int, merges: list[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Convert merges over stable operand ids (result keeps the smaller id)
    into slot steps under the replace-lower / shift-down convention."""
    alive = list(range(n))
    steps = []
    for x, y in merges:
        if x > y:
            x, y = y, x
        i = alive.index(x)
        j = alive.index(y)
        steps.append((i, j))
        del alive[j]
    return tuple(steps)


def _greedy_once(
    sets: list[dict[int, int]],
    adjacency: dict[int, set[int]],
    rng: np.random.Generator,
    temperature: float,
) -> tuple[list[tuple[int, int]], float]:
    """One greedy descent over stable ids.  Score of a candidate pair is
    (flops of the step) - (product of eliminated bond dims), optionally
    perturbed in log space by Gumbel noise."""
    sets = [dict(d) for d in sets]
    adjacency = {k: set(v) for k, v in adjacency.items()}
    alive = set(range(len(sets)))
    sizes = [float(np.prod([d for d in s.values()] or [1.0])) for s in sets]

    def pair_score(x: int, y: int) -> tuple[float, float]:
        union = 1.0
        shared = 1.0
        sy = sets[y]
        for lb, d in sets[x].items():
            union *= d
            if lb in sy:
                shared *= d
        for lb, d in sy.items():
            if lb not in sets[x]:
                union *= d
        score = union - shared
        if temperature > 0.0:
            u = rng.random()
            gumbel = -math.log(-math.log(u + 1e-300) + 1e-300)
            key = math.log1p(score) + temperature * gumbel
        else:
            key = score
        return key, union

    heap: list[tuple] = []  # (key, tiebreak, x, y, version_x, version_y)
    version = [0] * len(sets)

    def push(x: int, y: int):
        if x > y:
            x, y = y, x
        key, _ = pair_score(x, y)
        heapq.heappush(heap, (key, rng.random(), x, y, version[x], version[y]))

    for x, nbrs in adjacency.items():
        for y in nbrs:
            if x < y:
                push(x, y)

    merges: list[tuple[int, int]] = []
    total = 0.0
    while len(alive) > 1:
        pair = None
        while heap:
            _, _, x, y, vx, vy = heapq.heappop(heap)
            if x in alive and y in alive and version[x] == vx and version[y] == vy:
                pair = (x, y)
                break
        if pair is None:
            # disconnected components: outer-product the two smallest pieces
            rest = sorted(alive, key=lambda k: (sizes[k], k))
            pair = (rest[0], rest[1])
        x, y = min(pair), max(pair)
        union = 1.0
        merged = dict(sets[x])
        for lb, d in sets[y].items():
            if lb in merged:
                del merged[lb]
            else:
                merged[lb] = d
        for d in sets[x].values():
            union *= d
        for lb, d in sets[y].items():
            if lb not in sets[x]:
                union *= d
        total += union
        merges.append((x, y))
        alive.discard(y)
        sets[x] = merged
        sizes[x] = float(np.prod([d for d in merged.values()] or [1.0]))
        version[x] += 1
        nbrs = (adjacency.get(x, set()) | adjacency.get(y, set())) - {x, y}
        nbrs &= alive
        adjacency[x] = nbrs
        adjacency.pop(y, None)
        for z in nbrs:
            adjacency[z].discard(y)
            adjacency[z].add(x)
            push(x, z)
    return merges, total


def find_path_greedy(
    net: TensorNetwork,
    hypersamples: int = 100,
    rng: Optional[np.random.Generator] = None,
) -> ContractionPath:
    """Best path over `hypersamples` randomized greedy descents.

    The first descent is pure greedy (temperature 0); the rest perturb
    scores with Gumbel noise in log space.  Deterministic given `rng` seed.
    """
    if hypersamples < 1:
        raise ValueError("hypersamples must be >= 1")
    if len(net.operands) == 0:
        raise NetworkStructureError("network has no operands")
    if rng is None:
        rng = np.random.default_rng()
    n = len(net.operands)
    if n == 1:
        return ContractionPath(steps=(), est_cost=0.0)

    sets = _slot_dims(net)
    label2ids: dict[int, list[int]] = {}
    for k, s in enumerate(sets):
        for lb in s:
            label2ids.setdefault(lb, []).append(k)
    adjacency: dict[int, set[int]] = {k: set() for k in range(n)}
    for ids in label2ids.values():
        if len(ids) == 2:
            a, b = ids
            adjacency[a].add(b)
            adjacency[b].add(a)

    best: tuple[float, list[tuple[int, int]]] | None = None
    for k in range(hypersamples):
        temperature = 0.0 if k == 0 else 1.0
        merges, cost = _greedy_once(sets, adjacency, rng, temperature)
        if best is None or cost < best[0]:
            best = (cost, merges)
    cost, merges = best
    return ContractionPath(steps=_stable_merges_to_steps(n, merges), est_cost=cost)


MAX_OPTIMAL_OPERANDS = 14


def find_path_optimal(net: TensorNetwork) -> ContractionPath:
    """Globally minimal-cost path by dynamic programming over operand
    subsets.  Capped at 14 operands (3^14 subset splits)."""
    n = len(net.operands)
    if n == 0:
        raise NetworkStructureError("network has no operands")
    if n > MAX_OPTIMAL_OPERANDS:
        raise CapacityError(f"optimal planner capped at {MAX_OPTIMAL_OPERANDS} operands, got {n}")
    if n == 1:
        return ContractionPath(steps=(), est_cost=0.0)

    sets = _slot_dims(net)
    dims: dict[int, int] = {}
    occupancy: dict[int, int] = {}
    for k, s in enumerate(sets):
        for lb, d in s.items():
            dims[lb] = d
            occupancy[lb] = occupancy.get(lb, 0) | (1 << k)

    survive_cache: dict[int, dict[int, int]] = {}

    def survive(mask: int) -> dict[int, int]:
        # labels with exactly one endpoint inside the subset survive its
        # contraction (open labels appear once globally, so they qualify)
        got = survive_cache.get(mask)
        if got is not None:
            return got
        out = {}
        for lb, occ in occupancy.items():
            inside = occ & mask
            if inside and (inside & (inside - 1)) == 0:
                out[lb] = dims[lb]
        survive_cache[mask] = out
        return out

    full = (1 << n) - 1
    cost: dict[int, float] = {}
    split: dict[int, tuple[int, int]] = {}
    for k in range(n):
        cost[1 << k] = 0.0
    order = sorted(range(1, full + 1), key=lambda m: bin(m).count("1"))
    for mask in order:
        if mask & (mask - 1) == 0:
            continue
        low = mask & (-mask)
        best_c = math.inf
        best_split = None
        sub = (mask - 1) & mask
        while sub > 0:
            if sub & low:  # canonical: S1 contains the lowest bit
                other = mask ^ sub
                if other:
                    c1 = cost.get(sub)
                    c2 = cost.get(other)
                    if c1 is not None and c2 is not None:
                        s1 = survive(sub)
                        s2 = survive(other)
                        merge = 1.0
                        for lb, d in s1.items():
                            merge *= d
                        for lb, d in s2.items():
                            if lb not in s1:
                                merge *= d
                        c = c1 + c2 + merge
                        if c < best_c:
                            best_c = c
                            best_split = (sub, other)
            sub = (sub - 1) & mask
        cost[mask] = best_c
        split[mask] = best_split

    merges: list[tuple[int, int]] = []

    def emit(mask: int) -> int:
        if mask & (mask - 1) == 0:
            return mask.bit_length() - 1
        s1, s2 = split[mask]
        a = emit(s1)
        b = emit(s2)
        merges.append((min(a, b), max(a, b)))
        return min(a, b)

    emit(full)
    return ContractionPath(steps=_stable_merges_to_steps(n, merges), est_cost=cost[full])


class PathCache:
    """Map from (NetworkSignature, stage descriptor) to ContractionPath.

    Concurrent readers are safe; writes take a lock.  Planning the same key
    twice is idempotent.
    """

    def __init__(self):
        self._store: dict[tuple[NetworkSignature, Hashable], ContractionPath] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._store)

    def get(self, sig: NetworkSignature, stage: Hashable) -> Optional[ContractionPath]:
        return self._store.get((sig, stage))

    def put(self, sig: NetworkSignature, stage: Hashable, path: ContractionPath) -> None:
        with self._lock:
            self._store[(sig, stage)] = path

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
            self.hits = 0
            self.misses = 0

    def save(self, fp) -> None:
        """Persist entries as JSON (signatures become nested lists)."""
        entries = []
        for (sig, stage), path in self._store.items():
            entries.append(
                {
                    "signature": {
                        "num_operands": sig.num_operands,
                        "shapes": [list(s) for s in sig.shapes],
                        "bonds": [[list(p) for p in b] for b in sig.bonds],
                        "open_legs": [list(o) for o in sig.open_legs],
                    },
                    "stage": stage,
                    "steps": [list(s) for s in path.steps],
                    "est_cost": path.est_cost,
                }
            )
        json.dump({"entries": entries}, fp)

    @classmethod
    def load(cls, fp) -> "PathCache":
        doc = json.load(fp)
        cache = cls()
        for e in doc["entries"]:
            s = e["signature"]
            sig = NetworkSignature(
                num_operands=int(s["num_operands"]),
                shapes=tuple(tuple(int(d) for d in shape) for shape in s["shapes"]),
                bonds=tuple(
                    tuple(tuple(int(v) for v in p) for p in b) for b in s["bonds"]
                ),
                open_legs=tuple(tuple(int(v) for v in o) for o in s["open_legs"]),
            )
            stage = e["stage"]
            if isinstance(stage, list):
                stage = tuple(stage)
            path = ContractionPath(
                steps=tuple((int(i), int(j)) for i, j in e["steps"]),
                est_cost=float(e["est_cost"]),
            )
            cache.put(sig, stage, path)
        return cache


def cache_lookup_or_plan(
    cache: PathCache,
    net: TensorNetwork,
    stage: Hashable,
    hypersamples: int = 100,
    rng: Optional[np.random.Generator] = None,
) -> tuple[ContractionPath, bool]:
    """Return (path, hit).  On miss, plans greedily and stores the result.

    A hit is validated by structural replay; failure means the cache is
    corrupt (violating the signature contract) and raises PathCacheError.
    """
    sig = network_signature(net)
    path = cache.get(sig, stage)
    if path is not None:
        try:
            _structural_replay(net, path.steps)
        except NetworkStructureError as exc:
            raise PathCacheError(
                f"cached path for stage {stage!r} does not replay: {exc}"
            ) from exc
        cache.hits += 1
        return path, True
    path = find_path_greedy(net, hypersamples=hypersamples, rng=rng)
    cache.put(sig, stage, path)
    cache.misses += 1
    return path, False
