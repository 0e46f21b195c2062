"""Spin-chain Hamiltonians and their time dependence.

Energies are in units of the exchange coupling (``J = 1`` by default).
"""

from __future__ import annotations

from dataclasses import dataclass

from .pauli import PauliString, PauliSum

__all__ = [
    "lsm_hamiltonian",
    "lsm_structure",
    "mfim_hamiltonian",
    "tfim_hamiltonian",
    "ConstantSchedule",
    "LsmRamp",
    "SuddenQuench",
    "schedule_lsm_ramp",
    "schedule_quench",
]


def _two_site(n: int, i: int, j: int, letter: str) -> PauliString:
    return PauliString.from_sites(n, {i: letter, j: letter})


def _one_site(n: int, i: int, letter: str) -> PauliString:
    return PauliString.from_sites(n, {i: letter})


def lsm_hamiltonian(n: int, gamma: float, h_z: float, J: float = 1.0) -> PauliSum:
    """Anisotropic XY chain in a transverse field with open boundaries.

    ``H = -J sum_i [(1 + gamma) X_i X_{i+1} + (1 - gamma) Y_i Y_{i+1}] + h_z sum_i Z_i``
    """
    if n < 2:
        raise ValueError("LSM chain needs at least two sites")
    terms = []
    for i in range(n - 1):
        terms.append((-J * (1.0 + gamma), _two_site(n, i, i + 1, "X")))
        terms.append((-J * (1.0 - gamma), _two_site(n, i, i + 1, "Y")))
    for i in range(n):
        terms.append((h_z, _one_site(n, i, "Z")))
    return PauliSum(n, tuple(terms))


def lsm_structure(n: int) -> tuple[PauliString, ...]:
    """All strings that can appear in the LSM Hamiltonian, independent of gamma."""
    return lsm_hamiltonian(n, 0.0, 1.0).strings


def mfim_hamiltonian(
    n: int, J: float, h_x: float, h_z: float, periodic: bool = True
) -> PauliSum:
    """Mixed-field Ising chain ``-J sum Z_i Z_{i+1} + sum (h_x X_i + h_z Z_i)``."""
    if n < 2:
        raise ValueError("MFIM chain needs at least two sites")
    if periodic and n < 3:
        raise ValueError("periodic MFIM needs n >= 3 (n = 2 would double the bond)")
    n_bonds = n if periodic else n - 1
    terms = [(-J, _two_site(n, i, (i + 1) % n, "Z")) for i in range(n_bonds)]
    terms += [(h_x, _one_site(n, i, "X")) for i in range(n)]
    terms += [(h_z, _one_site(n, i, "Z")) for i in range(n)]
    return PauliSum(n, tuple(terms))


def tfim_hamiltonian(n: int, J: float, h_x: float, periodic: bool = True) -> PauliSum:
    return mfim_hamiltonian(n, J, h_x, 0.0, periodic)


@dataclass(frozen=True)
class ConstantSchedule:
    hamiltonian: PauliSum
    kind: str = "constant"

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def initial_hamiltonian(self) -> PauliSum:
        return self.hamiltonian

    @property
    def structure(self) -> tuple[PauliString, ...]:
        return self.hamiltonian.strings

    def hamiltonian_at(self, t: float) -> PauliSum:
        return self.hamiltonian


@dataclass(frozen=True)
class SuddenQuench:
    """``h_pre`` for t < 0 (it defines the initial state); ``h_post`` for t >= 0."""

    h_pre: PauliSum
    h_post: PauliSum
    kind: str = "sudden_quench"

    @property
    def n_qubits(self) -> int:
        return self.h_post.n_qubits

    @property
    def initial_hamiltonian(self) -> PauliSum:
        return self.h_pre

    @property
    def structure(self) -> tuple[PauliString, ...]:
        return self.h_post.strings

    def hamiltonian_at(self, t: float) -> PauliSum:
        return self.h_post


@dataclass(frozen=True)
class LsmRamp:
    """Linear ramp ``gamma(t) = 1 - 2 t / T`` held at ``gamma = -1`` for ``t > T``."""

    n: int
    T: float
    h_z: float
    J: float = 1.0
    kind: str = "lsm_linear_ramp"

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("ramp time T must be positive")

    @property
    def n_qubits(self) -> int:
        return self.n

    def gamma(self, t: float) -> float:
        return 1.0 - 2.0 * min(t, self.T) / self.T

    @property
    def initial_hamiltonian(self) -> PauliSum:
        return self.hamiltonian_at(0.0)

    @property
    def structure(self) -> tuple[PauliString, ...]:
        return lsm_structure(self.n)

    def hamiltonian_at(self, t: float) -> PauliSum:
        return lsm_hamiltonian(self.n, self.gamma(t), self.h_z, self.J)


def schedule_lsm_ramp(n: int, T: float, h_z: float, J: float = 1.0) -> LsmRamp:
    return LsmRamp(n, T, h_z, J)


def schedule_quench(h_pre: PauliSum, h_post: PauliSum) -> SuddenQuench:
    if h_pre.n_qubits != h_post.n_qubits:
        raise ValueError("pre- and post-quench Hamiltonians act on different sizes")
    return SuddenQuench(h_pre, h_post)
