"""Adaptive variational time stepping.

Each step: build the McLachlan system for ``H(t)``; while the distance is at
or above ``l2_cut`` append the pool operator whose zero-angle addition gives
the smallest bordered distance; then take an Euler step whose size keeps every
parameter change below ``dtheta_max``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ansatz import Ansatz
from .mclachlan import (
    McLachlanSystem,
    NumericalError,
    build_system,
    extend_system,
    scan_candidates,
)
from .observables import ObservableSet
from .pauli import PauliString, PauliSum

__all__ = [
    "AvqdsConfig",
    "TrajectoryRecord",
    "hamiltonian_pool",
    "two_local_pool",
    "adapt_ansatz",
    "advance",
    "run",
]

log = logging.getLogger(__name__)

_EPS = 1e-12


@dataclass(frozen=True)
class AvqdsConfig:
    l2_cut: float = 1e-3
    xi: float = 1e-6
    dtheta_max: float = 5e-3
    dt_max: float | None = None  # defaults to dtheta_max
    max_adds_per_step: int | None = None  # defaults to the pool size
    improvement_floor: float = 1e-8

    def __post_init__(self):
        for name in ("l2_cut", "xi", "dtheta_max", "improvement_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt_max is not None and not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.max_adds_per_step is not None and self.max_adds_per_step < 1:
            raise ValueError("max_adds_per_step must be at least 1")
        if not self.l2_cut > self.improvement_floor:
            raise ValueError("l2_cut must exceed improvement_floor")

    @property
    def step_cap(self) -> float:
        return self.dt_max if self.dt_max is not None else self.dtheta_max


@dataclass
class TrajectoryRecord:
    t: float
    thetas: np.ndarray
    n_theta: int
    n_cx: int
    L2: float
    dt_used: float
    observables: dict[str, float] = field(default_factory=dict)
    added: int = 0
    stalled: bool = False


def hamiltonian_pool(h: PauliSum | Sequence[PauliString]) -> list[PauliString]:
    """Distinct phase-free strings of ``h`` in term order."""
    strings = h.strings if isinstance(h, PauliSum) else tuple(h)
    if not strings:
        raise ValueError("cannot build a pool from an empty Hamiltonian")
    seen, pool = set(), []
    for p in strings:
        p = p.without_phase()
        if p.weight and (p.x, p.z) not in seen:
            seen.add((p.x, p.z))
            pool.append(p)
    return pool


def two_local_pool(n_qubits: int) -> list[PauliString]:
    """Every one- and two-site Pauli string, site-major with X < Y < Z."""
    if n_qubits < 2:
        raise ValueError("two-local pool needs at least two qubits")
    pool = [
        PauliString.from_sites(n_qubits, {i: a})
        for i in range(n_qubits)
        for a in "XYZ"
    ]
    for i, j in itertools.combinations(range(n_qubits), 2):
        for a, b in itertools.product("XYZ", repeat=2):
            pool.append(PauliString.from_sites(n_qubits, {i: a, j: b}))
    return pool


def adapt_ansatz(
    a: Ansatz,
    h: PauliSum,
    pool: Sequence[PauliString],
    cfg: AvqdsConfig,
    system: McLachlanSystem | None = None,
) -> tuple[Ansatz, McLachlanSystem, list[PauliString]]:
    """Grow ``a`` until the McLachlan distance drops below ``cfg.l2_cut``.

    Stops early (leaving ``L2 >= l2_cut``) when the best candidate improves the
    distance by less than ``cfg.improvement_floor`` or when
    ``cfg.max_adds_per_step`` operators have been added.
    """
    sys = system if system is not None else build_system(a, h, cfg.xi)
    added: list[PauliString] = []
    max_adds = cfg.max_adds_per_step or len(pool)
    while sys.L2 >= cfg.l2_cut and len(added) < max_adds:
        _, _, cand_l2 = scan_candidates(sys, pool)
        best = int(np.argmin(cand_l2))  # first index wins exact ties
        if sys.L2 - cand_l2[best] < cfg.improvement_floor:
            log.warning(
                "adaptive step stalled at L2=%.3e (best improvement %.3e)",
                sys.L2, sys.L2 - cand_l2[best],
            )
            break
        g = pool[best]
        a = a.append(g)
        sys = extend_system(sys, g)
        added.append(g)
    if added:
        log.debug("added %d operators, L2=%.3e", len(added), sys.L2)
    return a, sys, added


def advance(
    a: Ansatz, sys: McLachlanSystem, cfg: AvqdsConfig, dt_limit: float | None = None
) -> tuple[Ansatz, float]:
    """Euler update ``theta += theta_dot * dt`` with ``max |d theta| <= dtheta_max``."""
    theta_dot = sys.theta_dot
    if not np.all(np.isfinite(theta_dot)):
        raise NumericalError("non-finite parameter velocity")
    rate = float(np.max(np.abs(theta_dot))) if len(theta_dot) else 0.0
    log.debug("max |theta_dot| = %.3g", rate)  # diagnostic only, typically O(1-10)
    dt = min(cfg.step_cap, cfg.dtheta_max / max(rate, _EPS))
    if dt_limit is not None:
        dt = min(dt, dt_limit)
    if not len(theta_dot):
        return a, dt
    return a.with_thetas(a.thetas + theta_dot * dt), dt


def run(
    schedule,
    initial: Ansatz | np.ndarray,
    t_final: float,
    cfg: AvqdsConfig = AvqdsConfig(),
    observables: ObservableSet | None = None,
    pool: Sequence[PauliString] | None = None,
    reference: Callable[[float], np.ndarray] | None = None,
    on_step: Callable[[TrajectoryRecord, Ansatz], None] | None = None,
    checkpoints: Sequence[float] = (),
) -> tuple[list[TrajectoryRecord], Ansatz]:
    """Integrate from ``t = 0`` to ``t_final``.

    ``initial`` is either a reference state (empty ansatz) or a prepared
    ansatz.  ``pool`` defaults to the schedule's Hamiltonian term structure.
    ``reference(t)`` supplies the exact state for fidelity observables.
    Steps are clipped so that a record lands exactly on every time in
    ``checkpoints``.  Returns the records (the first at ``t = 0``) and the
    final ansatz.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    a = initial if isinstance(initial, Ansatz) else Ansatz(initial)
    if pool is None:
        pool = hamiltonian_pool(schedule.structure)
    psi0 = a.evaluate()
    stops = sorted({float(c) for c in checkpoints if 0 < c < t_final} | {float(t_final)})

    def observe(t, psi):
        if observables is None:
            return {}
        ref = reference(t) if observables.needs_reference else None
        return observables.evaluate(psi, h=schedule.hamiltonian_at(t), psi0=psi0, reference=ref)

    t = 0.0
    sys0 = build_system(a, schedule.hamiltonian_at(0.0), cfg.xi)
    records = [
        TrajectoryRecord(0.0, a.thetas.copy(), a.n_theta, a.cnot_count(), sys0.L2, 0.0,
                         observe(0.0, psi0))
    ]
    while t < t_final:
        h = schedule.hamiltonian_at(t)
        sys = sys0 if sys0 is not None else build_system(a, h, cfg.xi)
        sys0 = None
        a, sys, added = adapt_ansatz(a, h, pool, cfg, sys)
        stalled = sys.L2 >= cfg.l2_cut
        stop = next(c for c in stops if c > t)
        a, dt = advance(a, sys, cfg, dt_limit=stop - t)
        t_new = t + dt
        if stop - t_new < 1e-12 * max(1.0, stop):
            t_new = stop
        psi = a.evaluate()
        if not np.all(np.isfinite(psi)):
            raise NumericalError(f"non-finite state at t={t_new}")
        rec = TrajectoryRecord(
            t_new, a.thetas.copy(), a.n_theta, a.cnot_count(), sys.L2, dt,
            observe(t_new, psi), added=len(added), stalled=stalled,
        )
        records.append(rec)
        if on_step is not None:
            on_step(rec, a)
        t = t_new
    return records, a
