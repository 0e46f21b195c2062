"""McLachlan equations of motion for a pseudo-Trotter ansatz.

For the ansatz state ``|psi>`` with derivative states ``|d_mu>``::

    M_{mu nu} = 2 Re[<d_mu|d_nu> + <d_mu|psi><d_nu|psi>]
    V_mu      = 2 Im[<d_mu|H|psi> + <psi|d_mu><H>]
    var2      = 2 (<H^2> - <H>^2)

The parameter velocity solves ``(M + xi I) theta_dot = V`` and the residual
distance is ``L2 = var2 - V . theta_dot``.  The same regularized factorization
serves both, so the reported distance is consistent with the applied update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ansatz import Ansatz
from .pauli import PauliString, PauliSum, pauli_action

__all__ = [
    "McLachlanSystem",
    "build_M",
    "build_V",
    "build_system",
    "solve_theta_dot",
    "mclachlan_distance",
    "candidate_row",
    "scan_candidates",
    "extend_system",
    "estimate_measurement_resources",
]

DEFAULT_XI = 1e-6


class NumericalError(ArithmeticError):
    pass


@dataclass
class McLachlanSystem:
    M: np.ndarray
    V: np.ndarray
    var2: float
    energy: float
    xi: float
    theta_dot: np.ndarray
    L2: float
    # cached quantities reused by candidate scans and incremental extension
    psi: np.ndarray
    tangents: np.ndarray
    hpsi: np.ndarray
    overlaps: np.ndarray  # <d_mu|psi>

    @property
    def n_theta(self) -> int:
        return len(self.V)


def _metric(tangents: np.ndarray, overlaps: np.ndarray) -> np.ndarray:
    gram = tangents.conj() @ tangents.T
    M = 2.0 * np.real(gram + np.outer(overlaps, overlaps))
    return 0.5 * (M + M.T)


def _force(tangents, overlaps, hpsi, energy) -> np.ndarray:
    # <psi|d_mu> = conj(<d_mu|psi>)
    return 2.0 * np.imag(tangents.conj() @ hpsi + np.conj(overlaps) * energy)


def build_M(a: Ansatz) -> np.ndarray:
    psi, tan = a.tangents()
    return _metric(tan, tan.conj() @ psi)


def build_V(a: Ansatz, h: PauliSum) -> np.ndarray:
    psi, tan = a.tangents()
    hpsi = h.apply(psi)
    energy = float(np.vdot(psi, hpsi).real)
    return _force(tan, tan.conj() @ psi, hpsi, energy)


def solve_theta_dot(M: np.ndarray, V: np.ndarray, xi: float = DEFAULT_XI) -> np.ndarray:
    """Solve ``(M + xi I) x = V`` by Cholesky factorization."""
    if xi <= 0:
        raise ValueError("regularization xi must be positive")
    M = np.asarray(M, dtype=float)
    V = np.asarray(V, dtype=float)
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(V))):
        raise NumericalError("non-finite entries in McLachlan system")
    if len(V) == 0:
        return np.zeros(0)
    return cho_solve(cho_factor(M + xi * np.eye(len(V))), V)


def _assemble(psi, tan, hpsi, h_energy, var2, xi) -> McLachlanSystem:
    overlaps = tan.conj() @ psi
    M = _metric(tan, overlaps)
    V = _force(tan, overlaps, hpsi, h_energy)
    theta_dot = solve_theta_dot(M, V, xi)
    L2 = var2 - float(V @ theta_dot)
    return McLachlanSystem(
        M=M, V=V, var2=var2, energy=h_energy, xi=xi, theta_dot=theta_dot, L2=L2,
        psi=psi, tangents=tan, hpsi=hpsi, overlaps=overlaps,
    )


def build_system(a: Ansatz, h: PauliSum, xi: float = DEFAULT_XI) -> McLachlanSystem:
    """Assemble and solve the full system for ansatz ``a`` under Hamiltonian ``h``."""
    if h.n_qubits != a.n_qubits:
        raise ValueError("Hamiltonian and ansatz sizes differ")
    psi, tan = a.tangents()
    hpsi = h.apply(psi)
    energy = float(np.vdot(psi, hpsi).real)
    # <H^2> = ||H psi||^2 for Hermitian H
    var2 = 2.0 * (float(np.vdot(hpsi, hpsi).real) - energy * energy)
    if not np.isfinite(var2):
        raise NumericalError("non-finite energy variance")
    return _assemble(psi, tan, hpsi, energy, var2, xi)


def mclachlan_distance(sys: McLachlanSystem) -> float:
    """``var2 - V . (M + xi I)^-1 V``, reported without clamping."""
    theta_dot = solve_theta_dot(sys.M, sys.V, sys.xi)
    return sys.var2 - float(sys.V @ theta_dot)


def _candidate_tangents(psi: np.ndarray, pool: Sequence[PauliString]) -> np.ndarray:
    out = np.empty((len(pool), psi.shape[0]), dtype=complex)
    for k, g in enumerate(pool):
        perm, fac = pauli_action(g)
        out[k] = -1j * (fac * psi[perm])
    return out


def scan_candidates(
    base: McLachlanSystem, pool: Sequence[PauliString]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bordered-system distances for appending each pool operator at angle zero.

    Returns ``(rows, v_new, L2)``: ``rows[k]`` is the new M row (length
    ``N_theta + 1``, diagonal entry last), ``v_new[k]`` the new V entry and
    ``L2[k]`` the distance of the enlarged system.  Uses the Schur complement
    of the regularized base matrix, so no existing entries are recomputed.
    """
    psi = base.psi
    cand = _candidate_tangents(psi, pool)
    c_ovl = cand.conj() @ psi
    # M_{mu,g} for existing mu
    b = 2.0 * np.real(base.tangents.conj() @ cand.T + np.outer(base.overlaps, c_ovl))
    diag = 2.0 * np.real(np.einsum("ij,ij->i", cand.conj(), cand) + c_ovl * c_ovl)
    v_new = 2.0 * np.imag(cand.conj() @ base.hpsi + np.conj(c_ovl) * base.energy)
    n = base.n_theta
    if n:
        A = cho_factor(base.M + base.xi * np.eye(n))
        Ainv_b = cho_solve(A, b)
        schur = diag + base.xi - np.einsum("ij,ij->j", b, Ainv_b)
        resid = v_new - b.T @ base.theta_dot
    else:
        schur = diag + base.xi
        resid = v_new
    L2 = base.L2 - resid * resid / schur
    rows = np.vstack([b, diag[None, :]]).T if n else diag[:, None]
    return rows, v_new, L2


def candidate_row(
    a: Ansatz, g: PauliString, h: PauliSum, base: McLachlanSystem
) -> tuple[np.ndarray, float, float]:
    """Single-operator form of :func:`scan_candidates`."""
    if a.n_theta != base.n_theta:
        raise ValueError("base system does not belong to this ansatz")
    if g.phase != 0 or g.n_qubits != a.n_qubits:
        raise ValueError("candidate must be a phase-free string of matching size")
    rows, v_new, L2 = scan_candidates(base, [g])
    return rows[0], float(v_new[0]), float(L2[0])


def extend_system(base: McLachlanSystem, g: PauliString) -> McLachlanSystem:
    """System for the ansatz with ``g`` appended at angle zero.

    Existing derivative states are unchanged by a zero-angle rotation acting
    last, so the new tangent is simply ``-i g |psi>``.
    """
    new = _candidate_tangents(base.psi, [g])
    tan = np.vstack([base.tangents, new])
    return _assemble(base.psi, tan, base.hpsi, base.energy, base.var2, base.xi)


def estimate_measurement_resources(n_H: int, n_theta: int) -> dict[str, int]:
    """Upper bounds on distinct measurement circuits for one equation-of-motion step.

    ``direct`` counts direct-measurement circuits, ``hadamard`` generalized
    Hadamard-test circuits, and ``adaptive_extra`` the additional Hadamard
    tests needed by one adaptive expansion with a Hamiltonian operator pool.
    """
    if n_H < 1 or n_theta < 1:
        raise ValueError("n_H and n_theta must be at least 1")
    return {
        "direct": (n_H + 2) * n_theta + n_H + n_H * n_H,
        "hadamard": n_H * (n_theta - 1) + n_theta * (n_theta - 1) // 2,
        "adaptive_extra": n_H * (n_theta - 1),
    }
