"""Dense complex tensors with labeled indices and pairwise contraction.

Everything downstream (circuit networks, conditional-marginal sandwiches,
planner cost models) is expressed over these three objects: `Tensor`,
`TensorNetwork` and `NetworkSignature`.  Contraction paths are executed here
but planned in `ptsbe.planner`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    IncompletePathError,
    NetworkStructureError,
    ResourceLimitError,
)

DEFAULT_INTERMEDIATE_CEILING = 2**26  # max entries of any intermediate tensor


@dataclass(frozen=True)
class Index:
    """A tensor leg: opaque integer label plus dimension (2 for qubit legs)."""

    label: int
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise NetworkStructureError(f"index dim must be >= 1, got {self.dim}")


class Tensor:
    """Immutable dense complex tensor over an ordered list of labeled legs.

    Entries are complex128, row-major over the index order.  Labels within
    one tensor are pairwise distinct (self-traces are not representable).
    """

    __slots__ = ("indices", "data")

    def __init__(self, indices: Sequence[Index], data: np.ndarray):
        indices = tuple(indices)
        labels = [ix.label for ix in indices]
        if len(set(labels)) != len(labels):
            raise NetworkStructureError(f"repeated labels within one tensor: {labels}")
        arr = np.asarray(data, dtype=np.complex128)
        shape = tuple(ix.dim for ix in indices)
        if arr.shape != shape:
            if arr.size == int(np.prod(shape, dtype=np.int64)):
                arr = arr.reshape(shape)
            else:
                raise NetworkStructureError(
                    f"entry count {arr.size} != index-dim product {shape}"
                )
        arr = arr.view()
        arr.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):  # immutable after construction
        raise AttributeError("Tensor is immutable")

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(ix.label for ix in self.indices)

    @property
    def size(self) -> int:
        return self.data.size

    def dim_of(self, label: int) -> int:
        for ix in self.indices:
            if ix.label == label:
                return ix.dim
        raise KeyError(label)

    def relabeled(self, mapping: dict[int, int]) -> "Tensor":
        """Same entries, labels rewritten through `mapping` (identity if absent)."""
        new = [Index(mapping.get(ix.label, ix.label), ix.dim) for ix in self.indices]
        return Tensor(new, self.data)

    def conj(self) -> "Tensor":
        return Tensor(self.indices, np.conj(self.data))

    def transposed(self, label_order: Sequence[int]) -> "Tensor":
        """Reorder legs to the given label order (must be a permutation)."""
        if sorted(label_order) != sorted(self.labels):
            raise NetworkStructureError(
                f"transpose order {label_order} is not a permutation of {self.labels}"
            )
        pos = {ix.label: k for k, ix in enumerate(self.indices)}
        perm = [pos[lb] for lb in label_order]
        return Tensor([self.indices[p] for p in perm], np.transpose(self.data, perm))

    def __repr__(self):
        legs = ",".join(f"{ix.label}:{ix.dim}" for ix in self.indices)
        return f"Tensor([{legs}])"


class TensorNetwork:
    """An operand list plus the set of labels left open after contraction.

    Validity: every label appears at most twice across operands; a label in
    `open_indices` appears exactly once; a label appearing once but not open
    is a dangling bond and rejected.
    """

    __slots__ = ("operands", "open_indices")

    def __init__(self, operands: Sequence[Tensor], open_indices: Iterable[int]):
        operands = tuple(operands)
        open_indices = frozenset(open_indices)
        seen: dict[int, int] = {}
        for t in operands:
            for ix in t.indices:
                prev = seen.get(ix.label)
                if prev is None:
                    seen[ix.label] = ix.dim
                elif prev == ix.dim:
                    seen[ix.label] = -prev  # mark second occurrence
                elif prev == -ix.dim:
                    raise NetworkStructureError(
                        f"label {ix.label} appears more than twice"
                    )
                else:
                    raise NetworkStructureError(
                        f"label {ix.label} has mismatched dims {abs(prev)} vs {ix.dim}"
                    )
        for lb in open_indices:
            if lb not in seen:
                raise NetworkStructureError(f"open label {lb} not present in network")
            if seen[lb] < 0:
                raise NetworkStructureError(f"open label {lb} appears twice")
        for lb, d in seen.items():
            if d > 0 and lb not in open_indices:
                raise NetworkStructureError(f"dangling bond: label {lb} appears once")
        object.__setattr__(self, "operands", operands)
        object.__setattr__(self, "open_indices", open_indices)

    def __setattr__(self, name, value):
        raise AttributeError("TensorNetwork is immutable")

    def __len__(self):
        return len(self.operands)

    def __repr__(self):
        return f"TensorNetwork({len(self.operands)} operands, {len(self.open_indices)} open)"


@dataclass(frozen=True)
class NetworkSignature:
    """Structural fingerprint: operand count, per-slot shapes, bond and open
    adjacency by (slot, axis).  Invariant under entry values and under the
    integer values of labels; equal signatures guarantee a contraction path
    replays interchangeably.
    """

    num_operands: int
    shapes: tuple[tuple[int, ...], ...]
    bonds: tuple[tuple[tuple[int, int], tuple[int, int]], ...]
    open_legs: tuple[tuple[int, int], ...]


def network_signature(net: TensorNetwork) -> NetworkSignature:
    """Fingerprint the structure of `net`, ignoring entry values."""
    occ: dict[int, list[tuple[int, int]]] = {}
    for slot, t in enumerate(net.operands):
        for axis, ix in enumerate(t.indices):
            occ.setdefault(ix.label, []).append((slot, axis))
    bonds = []
    opens = []
    for label, places in occ.items():
        if len(places) == 2:
            bonds.append(tuple(sorted(places)))
        else:
            opens.append(places[0])
    return NetworkSignature(
        num_operands=len(net.operands),
        shapes=tuple(t.data.shape for t in net.operands),
        bonds=tuple(sorted(bonds)),
        open_legs=tuple(sorted(opens)),
    )


def contract_pair(a: Tensor, b: Tensor) -> Tensor:
    """Contract all shared labels between `a` and `b`.

    The result carries the symmetric difference of the two index sets, with
    a's surviving legs first (in a's order) then b's: this fixed order makes
    path replays bit-for-bit reproducible.  Tensors sharing no label produce
    their outer product.
    """
    b_dims = {ix.label: ix.dim for ix in b.indices}
    axes_a = []
    axes_b = []
    b_pos = {ix.label: k for k, ix in enumerate(b.indices)}
    for k, ix in enumerate(a.indices):
        d = b_dims.get(ix.label)
        if d is None:
            continue
        if d != ix.dim:
            raise NetworkStructureError(
                f"shared label {ix.label} has dims {ix.dim} vs {d}"
            )
        axes_a.append(k)
        axes_b.append(b_pos[ix.label])
    shared = {a.indices[k].label for k in axes_a}
    out = [ix for ix in a.indices if ix.label not in shared]
    out += [ix for ix in b.indices if ix.label not in shared]
    data = np.tensordot(a.data, b.data, axes=(axes_a, axes_b))
    return Tensor(out, data)


def execute_path(
    net: TensorNetwork,
    path,
    max_intermediate_entries: int = DEFAULT_INTERMEDIATE_CEILING,
) -> Tensor:
    """Replay a pairwise contraction schedule over `net`.

    `path` is a `ptsbe.planner.ContractionPath` or any object with a `steps`
    attribute (or a bare sequence of slot pairs).  Convention: step (i, j)
    with i < j contracts slots i and j, stores the result in slot i and
    removes slot j (higher slots shift down).  The result is independent of
    path choice up to floating-point reordering.

    Raises `ResourceLimitError` if any intermediate would exceed
    `max_intermediate_entries` entries, and `IncompletePathError` if the path
    leaves more than one operand.
    """
    steps = getattr(path, "steps", path)
    ops = list(net.operands)
    for step in steps:
        i, j = step
        if i > j:
            i, j = j, i
        if i == j or i < 0 or j >= len(ops):
            raise NetworkStructureError(f"invalid step {step} with {len(ops)} slots")
        a, b = ops[i], ops[j]
        shared = set(a.labels) & set(b.labels)
        out_entries = 1
        for ix in a.indices:
            if ix.label not in shared:
                out_entries *= ix.dim
        for ix in b.indices:
            if ix.label not in shared:
                out_entries *= ix.dim
        if out_entries > max_intermediate_entries:
            raise ResourceLimitError(
                f"intermediate of {out_entries} entries exceeds ceiling "
                f"{max_intermediate_entries}"
            )
        ops[i] = contract_pair(a, b)
        del ops[j]
    if len(ops) != 1:
        raise IncompletePathError(f"path left {len(ops)} operands, expected 1")
    result = ops[0]
    if set(result.labels) != set(net.open_indices):
        raise NetworkStructureError(
            f"result labels {sorted(result.labels)} != open indices "
            f"{sorted(net.open_indices)}"
        )
    return result
