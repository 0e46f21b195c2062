"""Fixed-step reference propagators: first-order Trotter and dense exact.

Time-dependent schedules are sampled at the start of every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .ansatz import rotation_cnots
from .observables import ObservableSet
from .pauli import PauliSum
from .state import MAX_DENSE_QUBITS, apply_pauli_rotation

__all__ = [
    "EvolutionRecord",
    "TrotterState",
    "trotter_step",
    "trotter_cnots_per_step",
    "exact_step",
    "run_trotter",
    "run_exact",
    "ExactReference",
]


@dataclass
class EvolutionRecord:
    t: float
    dt_used: float
    n_cx: int | None
    observables: dict[str, float] = field(default_factory=dict)


@dataclass
class TrotterState:
    psi: np.ndarray
    t: float = 0.0
    steps_taken: int = 0
    n_cx_total: int = 0


def trotter_step(psi: np.ndarray, h: PauliSum, dt: float) -> np.ndarray:
    """Apply ``prod_mu exp(-i dt c_mu P_mu)`` in canonical term order."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    for c, p in h.terms:
        psi = apply_pauli_rotation(p, c * dt, psi)
    return psi


def trotter_cnots_per_step(h: PauliSum) -> int:
    return sum(rotation_cnots(p) for p in h.strings)


@lru_cache(maxsize=4)
def _spectral(h: PauliSum) -> tuple[np.ndarray, np.ndarray]:
    mat = h.matrix()
    if not np.any(mat.imag):
        # real symmetric (no odd-Y strings): the real solver is several times faster
        return np.linalg.eigh(mat.real)
    return np.linalg.eigh(mat)


def exact_step(psi: np.ndarray, h: PauliSum, dt: float) -> np.ndarray:
    """``exp(-i h dt) psi`` via a (cached) dense eigendecomposition of ``h``."""
    if h.n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense propagation limited to {MAX_DENSE_QUBITS} qubits")
    if psi.shape[0] != 1 << h.n_qubits:
        raise ValueError("state dimension does not match the Hamiltonian")
    evals, evecs = _spectral(h)
    return evecs @ (np.exp(-1j * dt * evals) * (evecs.conj().T @ psi))


def _march(schedule, psi0, t_final, dt, observables, step, cnot_cost, reference, on_step):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    psi = np.asarray(psi0, dtype=complex)
    n_steps = int(np.ceil(t_final / dt - 1e-9))
    h = schedule.hamiltonian_at(0.0)
    n_cx = 0 if cnot_cost else None
    obs0 = _observe(observables, 0.0, psi, h, psi0, reference)
    records = [EvolutionRecord(0.0, 0.0, n_cx, obs0)]
    for k in range(n_steps):
        t = k * dt
        step_dt = min(dt, t_final - t)
        h = schedule.hamiltonian_at(t)
        psi = step(psi, h, step_dt)
        if cnot_cost:
            n_cx += trotter_cnots_per_step(h)
        t_new = t_final if k == n_steps - 1 else (k + 1) * dt
        h_new = schedule.hamiltonian_at(t_new)
        values = _observe(observables, t_new, psi, h_new, psi0, reference)
        records.append(EvolutionRecord(t_new, step_dt, n_cx, values))
        if on_step is not None:
            on_step(records[-1], psi)
    return records, psi


def _observe(observables, t, psi, h, psi0, reference):
    if observables is None:
        return {}
    # without a reference a fixed-step run is compared with itself
    ref = reference(t) if reference is not None and observables.needs_reference else psi
    return observables.evaluate(psi, h=h, psi0=psi0, reference=ref)


def run_trotter(
    schedule, psi0: np.ndarray, t_final: float, dt: float,
    observables: ObservableSet | None = None,
    reference: Callable[[float], np.ndarray] | None = None,
    on_step: Callable[[EvolutionRecord, np.ndarray], None] | None = None,
) -> tuple[list[EvolutionRecord], np.ndarray]:
    """First-order Trotter march; returns the records and the final state.

    ``reference(t)`` supplies the exact state for fidelity observables and
    ``on_step(record, psi)`` is called after every step.
    """
    return _march(schedule, psi0, t_final, dt, observables, trotter_step, True, reference, on_step)


def run_exact(
    schedule, psi0: np.ndarray, t_final: float, dt: float,
    observables: ObservableSet | None = None,
    reference: Callable[[float], np.ndarray] | None = None,
    on_step: Callable[[EvolutionRecord, np.ndarray], None] | None = None,
) -> tuple[list[EvolutionRecord], np.ndarray]:
    """Dense matrix-exponential march; exact for piecewise-constant schedules.

    ``reference(t)`` supplies the exact state for fidelity observables and
    ``on_step(record, psi)`` is called after every step.
    """
    return _march(schedule, psi0, t_final, dt, observables, exact_step, False, reference, on_step)


class ExactReference:
    """Exact states on a uniform grid, served by nearest grid time.

    Queries must be non-decreasing in time; the propagation advances lazily.
    """

    def __init__(self, schedule, psi0: np.ndarray, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.schedule = schedule
        self.dt = dt
        self._k = 0
        self._psi = np.asarray(psi0, dtype=complex).copy()

    def state_at(self, t: float) -> np.ndarray:
        target = int(np.floor(t / self.dt + 0.5))
        if target < self._k:
            raise ValueError("ExactReference queries must not go back in time")
        while self._k < target:
            h = self.schedule.hamiltonian_at(self._k * self.dt)
            self._psi = exact_step(self._psi, h, self.dt)
            self._k += 1
        return self._psi
