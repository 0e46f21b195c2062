"""Pseudo-Trotter variational ansatz ``prod_mu exp(-i theta_mu A_mu) |ref>``.

Generator 0 acts first on the reference state and the last generator acts
last, so appending an operator multiplies the current state from the left.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pauli import PauliString, format_pauli, parse_pauli, pauli_action
from .state import n_qubits_of, product_state

__all__ = ["Ansatz", "rotation_cnots"]


def rotation_cnots(p: PauliString) -> int:
    """CNOTs in a weight-p Pauli rotation with all-to-all connectivity: 2(p - 1)."""
    return 2 * (p.weight - 1) if p.weight > 1 else 0


@dataclass(frozen=True, eq=False)
class Ansatz:
    reference: np.ndarray
    generators: tuple[PauliString, ...] = ()
    thetas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=complex)
        n = n_qubits_of(ref)
        gens = tuple(self.generators)
        thetas = np.array(self.thetas, dtype=float).reshape(-1)
        if len(gens) != len(thetas):
            raise ValueError(
                f"{len(gens)} generators but {len(thetas)} angles"
            )
        for g in gens:
            _check_generator(g, n)
        ref.setflags(write=False)
        thetas.setflags(write=False)
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "thetas", thetas)

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.reference)

    @property
    def n_theta(self) -> int:
        return len(self.generators)

    def with_thetas(self, thetas: Sequence[float]) -> Ansatz:
        return Ansatz(self.reference, self.generators, thetas)

    def append(self, g: PauliString) -> Ansatz:
        """New ansatz with ``g`` acting last at angle zero; the state is unchanged."""
        _check_generator(g, self.n_qubits)
        return Ansatz(self.reference, self.generators + (g,), np.append(self.thetas, 0.0))

    def truncated(self, n_theta: int) -> Ansatz:
        return Ansatz(self.reference, self.generators[:n_theta], self.thetas[:n_theta])

    def evaluate(self) -> np.ndarray:
        psi = self.reference.copy()
        for g, th in zip(self.generators, self.thetas):
            perm, fac = pauli_action(g)
            psi = np.cos(th) * psi - 1j * np.sin(th) * (fac * psi[perm])
        return psi

    def derivative(self, mu: int) -> np.ndarray:
        """``d|psi>/d theta_mu``; unit norm since generators are involutory."""
        if not 0 <= mu < self.n_theta:
            raise IndexError(f"parameter index {mu} out of range [0, {self.n_theta})")
        psi = self.reference.copy()
        for nu, (g, th) in enumerate(zip(self.generators, self.thetas)):
            perm, fac = pauli_action(g)
            psi = np.cos(th) * psi - 1j * np.sin(th) * (fac * psi[perm])
            if nu == mu:
                psi = -1j * (fac * psi[perm])
        return psi

    def tangents(self) -> tuple[np.ndarray, np.ndarray]:
        """State and all parameter derivatives in one sweep.

        Returns ``(psi, D)`` where row ``mu`` of ``D`` is ``d|psi>/d theta_mu``.
        Each derivative row is created when its generator is reached and is
        carried through the remaining rotations together with the state.
        """
        n, dim = self.n_theta, self.reference.shape[0]
        psi = self.reference.copy()
        tan = np.empty((n, dim), dtype=complex)
        for mu, (g, th) in enumerate(zip(self.generators, self.thetas)):
            perm, fac = pauli_action(g)
            c, s = np.cos(th), np.sin(th)
            if mu:
                block = tan[:mu]
                tan[:mu] = c * block - (1j * s) * (block[:, perm] * fac)
            psi = c * psi - 1j * s * (fac * psi[perm])
            tan[mu] = -1j * (fac * psi[perm])
        return psi, tan

    def cnot_count(self) -> int:
        return sum(rotation_cnots(g) for g in self.generators)

    def two_qubit_count(self) -> int:
        return sum(1 for g in self.generators if g.weight == 2)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        ref = self.reference
        nz = np.flatnonzero(np.abs(ref) > 0)
        if len(nz) == 1 and ref[nz[0]] == 1.0:
            bits = [(int(nz[0]) >> i) & 1 for i in range(self.n_qubits)]
            reference = {"kind": "product", "bits": bits}
        else:
            reference = {
                "kind": "amplitudes",
                "real": ref.real.tolist(),
                "imag": ref.imag.tolist(),
            }
        return {
            "n_qubits": self.n_qubits,
            "reference": reference,
            "operators": [
                {"pauli": format_pauli(g), "theta": float(th)}
                for g, th in zip(self.generators, self.thetas)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Ansatz:
        n = int(data["n_qubits"])
        ref = data["reference"]
        if ref["kind"] == "product":
            psi0 = product_state(ref["bits"])
        elif ref["kind"] == "amplitudes":
            psi0 = np.asarray(ref["real"], dtype=float) + 1j * np.asarray(ref["imag"], dtype=float)
        else:
            raise ValueError(f"unknown reference kind {ref['kind']!r}")
        if n_qubits_of(psi0) != n:
            raise ValueError("reference size does not match n_qubits")
        gens = tuple(parse_pauli(op["pauli"], n) for op in data["operators"])
        thetas = [float(op["theta"]) for op in data["operators"]]
        return cls(psi0, gens, thetas)

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips exactly (<= 17 digits)
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> Ansatz:
        return cls.from_dict(json.loads(text))


def _check_generator(g: PauliString, n_qubits: int) -> None:
    if g.n_qubits != n_qubits:
        raise ValueError(f"generator acts on {g.n_qubits} qubits, ansatz has {n_qubits}")
    if g.phase != 0:
        raise ValueError(f"generator {g} must be phase-free")
