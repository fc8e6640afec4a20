"""Exact reference simulators for verification at small qubit counts.

Statevector evolution handles one concrete error realization; the density
evolution applies every channel exactly (all Kraus branches) and equals the
infinite-trajectory limit.  Both are deliberately independent of the tensor
network machinery they are used to check.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .circuits import Circuit, gate_matrix, pauli_matrix
from .errors import CapacityError

MAX_STATEVECTOR_QUBITS = 20
MAX_DENSITY_QUBITS = 6


def _realized_ops(c: Circuit, errors) -> Sequence[str]:
    if errors is None:
        return tuple(g.noise.identity_label() for g in c.gates)
    ops = getattr(errors, "realized", errors)
    if len(ops) != len(c.gates):
        raise ValueError(f"expected {len(c.gates)} realized operators, got {len(ops)}")
    return ops


def _apply_1q(state: np.ndarray, u: np.ndarray, q: int) -> np.ndarray:
    out = np.tensordot(u, state, axes=([1], [q]))
    return np.moveaxis(out, 0, q)


def _apply_2q(state: np.ndarray, u4: np.ndarray, qc: int, qt: int) -> np.ndarray:
    out = np.tensordot(u4.reshape(2, 2, 2, 2), state, axes=([2, 3], [qc, qt]))
    return np.moveaxis(out, (0, 1), (qc, qt))


def statevector(c: Circuit, errors=None) -> np.ndarray:
    """Amplitudes after applying gates (and realized errors, each fired just
    after its gate) to |0...0>.  `errors` is an ErrorSet or a bare sequence
    of realized operator labels, one per gate; None means error-free.

    Returned flat with qubit 0 as the most significant bit.
    """
    if c.n > MAX_STATEVECTOR_QUBITS:
        raise CapacityError(f"statevector oracle capped at {MAX_STATEVECTOR_QUBITS} qubits")
    ops = _realized_ops(c, errors)
    state = np.zeros((2,) * c.n, dtype=np.complex128)
    state[(0,) * c.n] = 1.0
    for g, realized in zip(c.gates, ops):
        u = gate_matrix(g)
        if g.arity == 1:
            state = _apply_1q(state, u, g.targets[0])
            if realized != "I":
                state = _apply_1q(state, pauli_matrix(realized), g.targets[0])
        else:
            state = _apply_2q(state, u, g.targets[0], g.targets[1])
            if realized != "II":
                if realized[0] != "I":
                    state = _apply_1q(state, pauli_matrix(realized[0]), g.targets[0])
                if realized[1] != "I":
                    state = _apply_1q(state, pauli_matrix(realized[1]), g.targets[1])
    return state.reshape(-1)


def exact_distribution(c: Circuit, errors=None) -> np.ndarray:
    """Measurement distribution |amplitudes|^2 for one error realization."""
    amps = statevector(c, errors)
    return np.abs(amps) ** 2


def _embed(m: np.ndarray, n: int, first_qubit: int) -> np.ndarray:
    """Full 2^n operator with `m` acting on contiguous qubits starting at
    `first_qubit` (qubit 0 is the most significant bit)."""
    arity = int(np.log2(m.shape[0]))
    left = 1 << first_qubit
    right = 1 << (n - first_qubit - arity)
    return np.kron(np.kron(np.eye(left), m), np.eye(right))


def exact_noisy_distribution(c: Circuit) -> np.ndarray:
    """Measurement diagonal of exact density-matrix evolution, applying each
    gate's channel as the full convex mixture of Pauli conjugations."""
    if c.n > MAX_DENSITY_QUBITS:
        raise CapacityError(f"density oracle capped at {MAX_DENSITY_QUBITS} qubits")
    dim = 1 << c.n
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    for g in c.gates:
        u = _embed(gate_matrix(g), c.n, g.targets[0])
        rho = u @ rho @ u.conj().T
        mixed = np.zeros_like(rho)
        for label, prob in g.noise.outcomes():
            if prob == 0.0:
                continue
            if set(label) == {"I"}:
                mixed += prob * rho
            else:
                k = _embed(pauli_matrix(label), c.n, g.targets[0])
                mixed += prob * (k @ rho @ k.conj().T)
        rho = mixed
    diag = np.real(np.diag(rho)).copy()
    diag[diag < 0.0] = 0.0
    return diag
