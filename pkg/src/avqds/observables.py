"""Quantities recorded along a trajectory.

Correlators are bare Pauli expectations ``<sigma^a_i sigma^a_j>``; a per-
observable ``scale`` (default 1) converts to other spin conventions, e.g.
``0.25`` for ``S = sigma / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .pauli import PauliString, PauliSum, expectation
from .state import n_qubits_of

__all__ = [
    "Observable",
    "ObservableSet",
    "pauli_correlator",
    "loschmidt_echo",
    "fidelity",
    "trajectory_std",
    "nearest_time_values",
]

KINDS = ("energy", "pauli_correlator", "loschmidt", "fidelity", "infidelity")


def pauli_correlator(psi: np.ndarray, axis: str, i: int, j: int) -> float:
    n = n_qubits_of(psi)
    if i == j:
        raise ValueError("correlator needs two distinct sites")
    for s in (i, j):
        if not 0 <= s < n:
            raise ValueError(f"site {s} out of range for {n} qubits")
    letter = axis.upper()
    if letter not in "XYZ" or len(letter) != 1:
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    op = PauliString.from_sites(n, {i: letter, j: letter})
    return expectation(PauliSum(n, ((1.0, op),)), psi)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``|<a|b>|^2``."""
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return float(abs(np.vdot(a, b)) ** 2)


def loschmidt_echo(psi0: np.ndarray, psi_t: np.ndarray) -> float:
    """Return probability ``|<psi0|psi_t>|^2``."""
    return fidelity(psi0, psi_t)


def trajectory_std(test: Sequence[float], ref: Sequence[float]) -> float:
    """Root-mean-square deviation with an ``N_t - 1`` denominator.

    Both series must already be sampled on the test mesh.
    """
    test = np.asarray(test, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if test.shape != ref.shape:
        raise ValueError("series lengths differ")
    if len(test) < 2:
        raise ValueError("need at least two time points")
    return float(np.sqrt(np.sum((test - ref) ** 2) / (len(test) - 1)))


def nearest_time_values(
    t_ref: Sequence[float], values: Sequence[float], t_query: Sequence[float]
) -> np.ndarray:
    """Sample ``values`` (on sorted mesh ``t_ref``) at the nearest mesh time of each query."""
    t_ref = np.asarray(t_ref, dtype=float)
    values = np.asarray(values)
    t_query = np.asarray(t_query, dtype=float)
    hi = np.clip(np.searchsorted(t_ref, t_query), 1, len(t_ref) - 1)
    lo = hi - 1
    pick = np.where(t_query - t_ref[lo] <= t_ref[hi] - t_query, lo, hi)
    return values[pick]


@dataclass(frozen=True)
class Observable:
    name: str
    kind: str
    axis: str | None = None
    sites: tuple[int, int] | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "pauli_correlator" and (self.axis is None or self.sites is None):
            raise ValueError(f"correlator {self.name!r} needs axis and sites")

    @property
    def needs_reference(self) -> bool:
        return self.kind in ("fidelity", "infidelity")


class ObservableSet:
    """Named observables evaluated together on one state."""

    def __init__(self, observables: Iterable[Observable], n_qubits: int):
        self.observables = tuple(observables)
        names = [o.name for o in self.observables]
        if len(set(names)) != len(names):
            raise ValueError("observable names must be unique")
        for o in self.observables:
            if o.sites is not None:
                i, j = o.sites
                if not (0 <= i < n_qubits and 0 <= j < n_qubits) or i == j:
                    raise ValueError(f"bad sites {o.sites} for observable {o.name!r}")
        self.n_qubits = n_qubits

    @classmethod
    def correlators(cls, n_qubits: int, pairs, axes=("x", "y"), energy=True, scale=1.0):
        obs = [Observable("energy", "energy")] if energy else []
        for i, j in pairs:
            for a in axes:
                obs.append(Observable(f"corr_{a}{a}_{i}_{j}", "pauli_correlator", a, (i, j), scale))
        return cls(obs, n_qubits)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.observables)

    @property
    def needs_reference(self) -> bool:
        return any(o.needs_reference for o in self.observables)

    def __len__(self) -> int:
        return len(self.observables)

    def evaluate(
        self,
        psi: np.ndarray,
        h: PauliSum | None = None,
        psi0: np.ndarray | None = None,
        reference: np.ndarray | None = None,
    ) -> dict[str, float]:
        out = {}
        for o in self.observables:
            if o.kind == "energy":
                val = expectation(h, psi)
            elif o.kind == "pauli_correlator":
                val = pauli_correlator(psi, o.axis, *o.sites)
            elif o.kind == "loschmidt":
                val = loschmidt_echo(psi0, psi)
            elif o.kind == "fidelity":
                val = fidelity(reference, psi)
            else:
                val = 1.0 - fidelity(reference, psi)
            out[o.name] = o.scale * val
        return out
