"""Shared test oracles: deliberately naive, independent implementations that
the fast paths are checked against."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from ptsbe.circuits import Circuit, Gate, NoiseChannel
from ptsbe.tensor import Index, Tensor, TensorNetwork


def brute_force_contract(net: TensorNetwork) -> np.ndarray:
    """Naive full summation over every bond label.  Result axes follow the
    sorted open labels."""
    dims: dict[int, int] = {}
    for t in net.operands:
        for ix in t.indices:
            dims[ix.label] = ix.dim
    labels = sorted(dims)
    open_sorted = sorted(net.open_indices)
    out = np.zeros([dims[lb] for lb in open_sorted] or [1], dtype=np.complex128)
    for assign in itertools.product(*[range(dims[lb]) for lb in labels]):
        env = dict(zip(labels, assign))
        val = 1.0 + 0.0j
        for t in net.operands:
            val *= t.data[tuple(env[ix.label] for ix in t.indices)]
            if val == 0.0:
                break
        out[tuple(env[lb] for lb in open_sorted)] += val
    return out if open_sorted else out.reshape(())


def counted_pair_contract(a: Tensor, b: Tensor) -> tuple[Tensor, int]:
    """Pair contraction by explicit loops, counting every scalar multiply."""
    shared = [ix.label for ix in a.indices if ix.label in set(b.labels)]
    out_idx = [ix for ix in a.indices if ix.label not in shared]
    out_idx += [ix for ix in b.indices if ix.label not in shared]
    all_idx = out_idx + [ix for ix in a.indices if ix.label in shared]
    out = np.zeros([ix.dim for ix in out_idx] or [1], dtype=np.complex128)
    count = 0
    for assign in itertools.product(*[range(ix.dim) for ix in all_idx]):
        env = {ix.label: v for ix, v in zip(all_idx, assign)}
        va = a.data[tuple(env[ix.label] for ix in a.indices)]
        vb = b.data[tuple(env[ix.label] for ix in b.indices)]
        count += 1
        out[tuple(env[ix.label] for ix in out_idx)] += va * vb
    result = Tensor(out_idx, out if out_idx else out.reshape(()))
    return result, count


def counted_execute(net: TensorNetwork, steps) -> tuple[Tensor, int]:
    """Replay a path with the counting contraction."""
    ops = list(net.operands)
    total = 0
    for i, j in steps:
        if i > j:
            i, j = j, i
        merged, count = counted_pair_contract(ops[i], ops[j])
        total += count
        ops[i] = merged
        del ops[j]
    assert len(ops) == 1
    return ops[0], total


def random_network(
    rng: np.random.Generator,
    n_ops: int = 5,
    n_open: int = 2,
    dims=(2, 2, 3),
    extra_bonds: int = 1,
) -> TensorNetwork:
    """Connected ring of tensors with random chord bonds and open legs."""
    legs: list[list[tuple[int, int]]] = [[] for _ in range(n_ops)]
    label = 0

    def bond(a: int, b: int):
        nonlocal label
        d = int(rng.choice(dims))
        legs[a].append((label, d))
        legs[b].append((label, d))
        label += 1

    for k in range(n_ops):
        bond(k, (k + 1) % n_ops)
    for _ in range(extra_bonds):
        a, b = rng.choice(n_ops, size=2, replace=False)
        bond(int(a), int(b))
    opens = []
    for _ in range(n_open):
        k = int(rng.integers(n_ops))
        d = int(rng.choice(dims))
        legs[k].append((label, d))
        opens.append(label)
        label += 1
    operands = []
    for lg in legs:
        shape = [d for _, d in lg]
        data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        operands.append(Tensor([Index(lb, d) for lb, d in lg], data))
    return TensorNetwork(operands, opens)


def all_complete_paths(n_ops: int):
    """Every pairwise merge sequence over n_ops slots (slot convention:
    result replaces the lower slot)."""
    if n_ops == 1:
        yield []
        return
    for i, j in itertools.combinations(range(n_ops), 2):
        for rest in all_complete_paths(n_ops - 1):
            yield [(i, j)] + rest


def replay_cost(net: TensorNetwork, steps) -> float:
    """Test-local flop model: product of union dims per step."""
    slots = [{ix.label: ix.dim for ix in t.indices} for t in net.operands]
    total = 0.0
    for i, j in steps:
        if i > j:
            i, j = j, i
        a, b = slots[i], slots[j]
        union = dict(a)
        union.update(b)
        total += float(np.prod(list(union.values())))
        merged = {k: v for k, v in union.items() if (k in a) != (k in b)}
        slots[i] = merged
        del slots[j]
    return total


def oracle_conditional(c: Circuit, realized, sizes: tuple[int, ...], j: int, prefix: str) -> np.ndarray:
    """Conditional marginal from the statevector oracle: fix prefix qubits,
    sum out later qubits, normalize over the stage-j batch."""
    from ptsbe import oracle

    p = oracle.exact_distribution(c, realized).reshape((2,) * c.n)
    offset = sum(sizes[: j - 1])
    b = sizes[j - 1]
    for q, bit in enumerate(prefix):
        p = np.take(p, int(bit), axis=0)  # axis 0 is always the next prefix qubit
    axes_future = tuple(range(b, p.ndim))
    marg = p.sum(axis=axes_future) if axes_future else p
    vec = marg.reshape(-1)
    return vec / vec.sum()


def noiseless(kind: str, targets, angle=None) -> Gate:
    ch = NoiseChannel("depolarizing" if kind.startswith("C") else "X", 0.0)
    return Gate(kind, tuple(targets), angle, ch)


@pytest.fixture
def bell_circuit() -> Circuit:
    return Circuit(2, (noiseless("H", (0,)), noiseless("CX", (0, 1))))


@pytest.fixture
def ghz3_circuit() -> Circuit:
    return Circuit(
        3,
        (noiseless("H", (0,)), noiseless("CX", (0, 1)), noiseless("CX", (1, 2))),
    )
