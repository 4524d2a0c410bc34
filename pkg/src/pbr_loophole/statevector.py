"""Dense statevector engine restricted to the gates of the PBR circuit.

Basis index convention: qubit 0 is the most significant bit, so the
amplitude of ``|b_0 b_1 ... b_{n-1}>`` lives at index ``sum(b_q << (n-1-q))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def phase_gate(phi: float) -> np.ndarray:
    """P_phi = |0><0| + exp(i phi) |1><1|."""
    return np.array([[1, 0], [0, np.exp(1j * phi)]], dtype=complex)


def check_unitary(g: np.ndarray, tol: float = NORM_TOL) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.shape != (2, 2):
        raise ValueError(f"single-qubit gate must be 2x2, got shape {g.shape}")
    if not np.allclose(g.conj().T @ g, np.eye(2), rtol=0.0, atol=tol):
        raise ValueError("gate is not unitary")
    return g


@dataclass(frozen=True)
class StateVector:
    """Unit-norm amplitude vector over ``2**n`` computational basis states."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        size = amps.size
        if size < 2 or size & (size - 1):
            raise ValueError(f"amplitude count must be 2**n with n >= 1, got {size}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: sum |a|^2 = {norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def from_list(cls, values: Sequence[complex]) -> StateVector:
        return cls(np.asarray(values, dtype=complex))

    def inner(self, other: StateVector) -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __len__(self) -> int:
        return self.amplitudes.size


def tensor_product(a: StateVector, b: StateVector) -> StateVector:
    # np.kron puts a's index in the high bits, matching the MSB = qubit 0 convention
    return StateVector(np.kron(a.amplitudes, b.amplitudes))


def apply_gate_array(amps: np.ndarray, n: int, q: int, g: np.ndarray) -> np.ndarray:
    """Apply a 2x2 gate to qubit ``q`` along the last axis of ``amps``.

    Leading axes are treated as a batch, which is what the circuit search uses.
    """
    if not 0 <= q < n:
        raise IndexError(f"qubit index {q} out of range for {n} qubits")
    batch = amps.shape[:-1]
    view = amps.reshape(*batch, 1 << q, 2, 1 << (n - q - 1))
    out = np.einsum("ij,...ajb->...aib", g, view)
    return out.reshape(*batch, 1 << n)


def apply_single_qubit_gate(s: StateVector, q: int, g: np.ndarray) -> StateVector:
    g = check_unitary(g)
    return StateVector(apply_gate_array(s.amplitudes, s.n, q, g))


def apply_selective_phase(s: StateVector, xi: float) -> StateVector:
    """Multiply the ``|0...0>`` amplitude by ``exp(i xi)``."""
    amps = s.amplitudes.copy()
    amps[0] *= np.exp(1j * xi)
    return StateVector(amps)


def hadamard_all_array(amps: np.ndarray, n: int) -> np.ndarray:
    """H on every qubit, as n butterfly passes over the last axis."""
    out = np.asarray(amps, dtype=complex)
    batch = out.shape[:-1]
    scale = 1.0 / np.sqrt(2.0)
    for q in range(n):
        view = out.reshape(*batch, 1 << q, 2, 1 << (n - q - 1))
        lo = view[..., 0, :]
        hi = view[..., 1, :]
        out = np.stack(((lo + hi) * scale, (lo - hi) * scale), axis=-2).reshape(*batch, 1 << n)
    return out


def born_probabilities(s: StateVector) -> np.ndarray:
    return np.abs(s.amplitudes) ** 2
