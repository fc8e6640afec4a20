"""Quantum circuit model: gate library, per-gate stochastic noise channels,
the random-circuit generator, and tensor-network construction.

Conventions fixed here and relied on everywhere else:
  - qubit 0 is the leftmost bit of a measurement bitstring;
  - two-qubit gates act on nearest neighbors (q, q+1) with the lower index
    as control;
  - each gate carries exactly one noise channel, which fires immediately
    AFTER the gate in circuit order;
  - `build_network` emits operands as n |0> kets followed by one tensor per
    gate in circuit order, so the operand slot of gate s is n + s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import Index, Tensor, TensorNetwork

SINGLE_QUBIT_KINDS = ("H", "X", "Y", "Z", "T", "Rx")
TWO_QUBIT_KINDS = ("CX", "CY", "CZ", "CH", "CRx")
PAULI_KINDS = ("X", "Y", "Z")

# all 15 non-identity two-qubit Pauli labels, in a fixed draw order
TWO_QUBIT_PAULIS = tuple(a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II")

_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

_FIXED_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2),
    "X": _PAULI["X"],
    "Y": _PAULI["Y"],
    "Z": _PAULI["Z"],
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=np.complex128),
}


def pauli_matrix(label: str) -> np.ndarray:
    """Single- or two-qubit Pauli operator for labels like "X" or "ZY"."""
    if len(label) == 1:
        return _PAULI[label]
    return np.kron(_PAULI[label[0]], _PAULI[label[1]])


@dataclass(frozen=True)
class NoiseChannel:
    """Stochastic channel attached to one gate.

    kind "X"|"Y"|"Z": the Pauli fires with probability p, else identity.
    kind "depolarizing": each of the 15 non-identity two-qubit Paulis fires
    with probability p/15, else identity.
    """

    kind: str
    p: float

    def __post_init__(self):
        if self.kind not in PAULI_KINDS and self.kind != "depolarizing":
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise probability {self.p} outside [0, 1]")

    @property
    def arity(self) -> int:
        return 2 if self.kind == "depolarizing" else 1

    def outcomes(self) -> list[tuple[str, float]]:
        """(realized operator label, probability) pairs; identity first."""
        if self.kind == "depolarizing":
            return [("II", 1.0 - self.p)] + [(s, self.p / 15.0) for s in TWO_QUBIT_PAULIS]
        return [("I", 1.0 - self.p), (self.kind, self.p)]

    def identity_label(self) -> str:
        return "II" if self.kind == "depolarizing" else "I"


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    angle: Optional[float] = None
    noise: NoiseChannel = field(default=NoiseChannel("X", 0.0))

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind in SINGLE_QUBIT_KINDS:
            if len(self.targets) != 1:
                raise ValueError(f"{self.kind} takes one target, got {self.targets}")
            if self.noise.arity != 1:
                raise ValueError(f"{self.kind} needs a single-qubit noise channel")
        elif self.kind in TWO_QUBIT_KINDS:
            if len(self.targets) != 2:
                raise ValueError(f"{self.kind} takes two targets, got {self.targets}")
            if self.targets[1] != self.targets[0] + 1:
                raise ValueError(
                    f"{self.kind} targets must be (q, q+1) with the control first"
                )
            if self.noise.arity != 2:
                raise ValueError(f"{self.kind} needs a two-qubit noise channel")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        rotational = self.kind in ("Rx", "CRx")
        if rotational and self.angle is None:
            raise ValueError(f"{self.kind} requires an angle")
        if not rotational and self.angle is not None:
            raise ValueError(f"{self.kind} does not take an angle")

    @property
    def arity(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n < 1:
            raise ValueError("circuit needs at least one qubit")
        for g in self.gates:
            for q in g.targets:
                if not 0 <= q < self.n:
                    raise ValueError(f"gate target {q} outside 0..{self.n - 1}")


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of the gate: 2x2, or 4x4 in the |control, target> basis."""
    if g.kind in SINGLE_QUBIT_KINDS:
        return _rx(g.angle) if g.kind == "Rx" else _FIXED_1Q[g.kind]
    u = _rx(g.angle) if g.kind == "CRx" else _FIXED_1Q[g.kind[1:]]
    out = np.eye(4, dtype=np.complex128)
    out[2:, 2:] = u
    return out


def random_circuit(
    n: int,
    g: int,
    two_qubit_fraction: float = 0.2,
    p_range: tuple[float, float] = (0.02, 0.2),
    rng: Optional[np.random.Generator] = None,
) -> Circuit:
    """Random circuit with exactly round(g * two_qubit_fraction) two-qubit
    gates at uniformly chosen positions; every gate gets a noise channel with
    p ~ Uniform(p_range).  Single-qubit gates draw a uniform Pauli error
    type; two-qubit gates get depolarizing noise."""
    if n < 2:
        raise ValueError("random_circuit requires n >= 2")
    if g < 1:
        raise ValueError("random_circuit requires g >= 1")
    if not 0.0 <= two_qubit_fraction <= 1.0:
        raise ValueError("two_qubit_fraction must lie in [0, 1]")
    if rng is None:
        rng = np.random.default_rng()
    lo, hi = p_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"p_range must satisfy 0 <= lo <= hi <= 1, got {p_range}")
    n_two = round(g * two_qubit_fraction)
    two_slots = set(rng.choice(g, size=n_two, replace=False).tolist()) if n_two else set()
    gates = []
    for slot in range(g):
        p = float(rng.uniform(lo, hi))
        if slot in two_slots:
            kind = TWO_QUBIT_KINDS[int(rng.integers(len(TWO_QUBIT_KINDS)))]
            q = int(rng.integers(n - 1))
            angle = float(rng.uniform(0.0, 2.0 * math.pi)) if kind == "CRx" else None
            noise = NoiseChannel("depolarizing", p)
            gates.append(Gate(kind, (q, q + 1), angle, noise))
        else:
            kind = SINGLE_QUBIT_KINDS[int(rng.integers(len(SINGLE_QUBIT_KINDS)))]
            q = int(rng.integers(n))
            angle = float(rng.uniform(0.0, 2.0 * math.pi)) if kind == "Rx" else None
            noise = NoiseChannel(PAULI_KINDS[int(rng.integers(3))], p)
            gates.append(Gate(kind, (q,), angle, noise))
    return Circuit(n=n, gates=tuple(gates))


def _wire_labels(c: Circuit) -> tuple[list[tuple[int, ...]], list[int], int]:
    """Assign bond labels: returns (per-gate index labels, final per-qubit
    labels, total label count).  Gate s on one qubit gets (out, in); on two
    qubits (out_c, out_t, in_c, in_t)."""
    current = list(range(c.n))  # ket leg of qubit q is label q
    nxt = c.n
    per_gate = []
    for g in c.gates:
        if g.arity == 1:
            q = g.targets[0]
            out = nxt
            nxt += 1
            per_gate.append((out, current[q]))
            current[q] = out
        else:
            qc, qt = g.targets
            oc, ot = nxt, nxt + 1
            nxt += 2
            per_gate.append((oc, ot, current[qc], current[qt]))
            current[qc], current[qt] = oc, ot
    return per_gate, current, nxt


def final_qubit_labels(c: Circuit) -> tuple[int, ...]:
    """Open leg label of each qubit, in qubit order, for build_network(c)."""
    _, current, _ = _wire_labels(c)
    return tuple(current)


def build_network(c: Circuit) -> TensorNetwork:
    """Uncontracted network of the error-free circuit: n |0> kets, then one
    operand per gate; open indices are the n final qubit legs."""
    per_gate, current, _ = _wire_labels(c)
    ket = np.array([1.0, 0.0], dtype=np.complex128)
    operands = [Tensor([Index(q, 2)], ket) for q in range(c.n)]
    for g, labels in zip(c.gates, per_gate):
        u = gate_matrix(g)
        if g.arity == 1:
            out, inn = labels
            operands.append(Tensor([Index(out, 2), Index(inn, 2)], u))
        else:
            oc, ot, ic, it = labels
            operands.append(
                Tensor(
                    [Index(oc, 2), Index(ot, 2), Index(ic, 2), Index(it, 2)],
                    u.reshape(2, 2, 2, 2),
                )
            )
    return TensorNetwork(operands, current)


def circuit_to_json(c: Circuit) -> str:
    gates = []
    for g in c.gates:
        doc = {"kind": g.kind, "targets": list(g.targets)}
        if g.angle is not None:
            doc["angle"] = g.angle
        doc["noise"] = {"kind": g.noise.kind, "p": g.noise.p}
        gates.append(doc)
    return json.dumps({"n": c.n, "gates": gates})


def circuit_from_json(text: str) -> Circuit:
    doc = json.loads(text)
    gates = []
    for g in doc["gates"]:
        noise = NoiseChannel(kind=g["noise"]["kind"], p=g["noise"]["p"])
        gates.append(
            Gate(
                kind=g["kind"],
                targets=tuple(g["targets"]),
                angle=g.get("angle"),
                noise=noise,
            )
        )
    return Circuit(n=doc["n"], gates=tuple(gates))


def channel_probabilities(channel: NoiseChannel) -> list[float]:
    """Outcome probabilities in draw order; sums to 1 (compensated)."""
    return [p for _, p in channel.outcomes()]
