"""Dense state vectors.

States are plain complex numpy arrays of length ``2**n``.  Qubit 0 is the
least-significant bit of the basis index, so ``product_state([1, 0])`` has its
single nonzero amplitude at index 1.  No global-phase convention is imposed.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .pauli import PauliString, PauliSum, pauli_action

__all__ = [
    "DegenerateGroundStateWarning",
    "n_qubits_of",
    "inner",
    "apply_pauli_rotation",
    "product_state",
    "ground_state",
]

MAX_DENSE_QUBITS = 14


class DegenerateGroundStateWarning(UserWarning):
    pass


def n_qubits_of(psi: np.ndarray) -> int:
    dim = psi.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def apply_pauli_rotation(p: PauliString, theta: float, psi: np.ndarray) -> np.ndarray:
    """``exp(-i theta p) psi = cos(theta) psi - i sin(theta) p psi``.

    Works on a single state or on the columns of a ``(2**n, k)`` block.
    """
    if p.phase != 0:
        raise ValueError(f"rotation generator must carry phase +1, got {p}")
    if psi.shape[0] != 1 << p.n_qubits:
        raise ValueError("state dimension does not match the generator")
    perm, fac = pauli_action(p)
    c, s = np.cos(theta), np.sin(theta)
    if psi.ndim == 1:
        return c * psi - 1j * s * (fac * psi[perm])
    return c * psi - 1j * s * (fac[:, None] * psi[perm])


def product_state(bits: Sequence[int]) -> np.ndarray:
    """Computational basis state; ``bits[i]`` is the value of qubit ``i``."""
    if len(bits) == 0:
        raise ValueError("need at least one qubit")
    index = 0
    for i, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"basis label for qubit {i} must be 0 or 1, got {b!r}")
        index |= int(b) << i
    psi = np.zeros(1 << len(bits), dtype=complex)
    psi[index] = 1.0
    return psi


def ground_state(h: PauliSum) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of ``h`` by dense diagonalization.

    Warns with :class:`DegenerateGroundStateWarning` if the gap to the first
    excited level is below 1e-10; an arbitrary ground-space vector is returned.
    """
    if h.n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense eigensolve limited to {MAX_DENSE_QUBITS} qubits")
    evals, evecs = np.linalg.eigh(h.matrix())
    if len(evals) > 1 and evals[1] - evals[0] < 1e-10:
        warnings.warn(
            f"ground state is degenerate (gap {evals[1] - evals[0]:.2e})",
            DegenerateGroundStateWarning,
            stacklevel=2,
        )
    psi = evecs[:, 0].astype(complex)
    psi /= np.linalg.norm(psi)
    return float(evals[0]), psi
