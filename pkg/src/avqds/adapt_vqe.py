"""Qubit-ADAPT-VQE ground-state preparation for use as an AVQDS starting ansatz."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .ansatz import Ansatz
from .driver import two_local_pool
from .pauli import PauliString, PauliSum, pauli_action

__all__ = ["VqeConfig", "VqeStallWarning", "operator_gradient", "pool_gradients", "prepare_ground_state"]

log = logging.getLogger(__name__)


class VqeStallWarning(UserWarning):
    pass


@dataclass(frozen=True)
class VqeConfig:
    pool: tuple[PauliString, ...] | None = None  # None -> two_local_pool
    grad_tol: float = 1e-3
    energy_tol: float = 1e-8
    max_operators: int = 100
    max_inner_iterations: int = 2000

    def __post_init__(self):
        if self.grad_tol <= 0 or self.energy_tol <= 0:
            raise ValueError("tolerances must be positive")


def pool_gradients(psi: np.ndarray, h: PauliSum, pool: Sequence[PauliString]) -> np.ndarray:
    """``dE/dtheta'`` at zero for appending each pool operator (acting last).

    ``d/dtheta <psi|e^{i theta g} H e^{-i theta g}|psi> = -2 Im <g psi|H psi>``.
    """
    hpsi = h.apply(psi)
    out = np.empty(len(pool))
    for k, g in enumerate(pool):
        perm, fac = pauli_action(g)
        out[k] = -2.0 * np.vdot(fac * psi[perm], hpsi).imag
    return out


def operator_gradient(a: Ansatz, g: PauliString, h: PauliSum) -> float:
    return float(pool_gradients(a.evaluate(), h, [g])[0])


def _energy_and_grad(thetas, a: Ansatz, h: PauliSum):
    psi, tan = a.with_thetas(thetas).tangents()
    hpsi = h.apply(psi)
    energy = float(np.vdot(psi, hpsi).real)
    grad = 2.0 * np.real(tan.conj() @ hpsi)
    return energy, grad


def prepare_ground_state(
    h: PauliSum, ref: np.ndarray | Ansatz, cfg: VqeConfig = VqeConfig()
) -> tuple[Ansatz, float]:
    """Grow and optimize an ansatz by largest energy gradient.

    Each outer iteration appends the pool operator with the largest
    ``|dE/dtheta|`` (lowest index on ties) and re-minimizes all angles with
    BFGS from the previous optimum.  Stops once the largest gradient is below
    ``cfg.grad_tol`` or ``cfg.max_operators`` have been used.
    """
    a = ref if isinstance(ref, Ansatz) else Ansatz(ref)
    pool = list(cfg.pool) if cfg.pool is not None else two_local_pool(a.n_qubits)
    energy = float(np.vdot(a.evaluate(), h.apply(a.evaluate())).real)
    while True:
        grads = np.abs(pool_gradients(a.evaluate(), h, pool))
        best = int(np.argmax(grads))
        if grads[best] < cfg.grad_tol:
            break
        if a.n_theta >= cfg.max_operators:
            warnings.warn(
                f"ADAPT-VQE hit max_operators={cfg.max_operators} with gradient {grads[best]:.2e}",
                VqeStallWarning, stacklevel=2,
            )
            break
        a = a.append(pool[best])
        res = minimize(
            _energy_and_grad, a.thetas, args=(a, h), jac=True, method="BFGS",
            options={"gtol": cfg.grad_tol * 1e-3, "maxiter": cfg.max_inner_iterations},
        )
        # BFGS never returns a point above its start, so energy is nonincreasing
        new_energy = float(res.fun)
        a = a.with_thetas(res.x)
        log.debug("ADAPT-VQE %d ops: E=%.10f (dE=%.2e)", a.n_theta, new_energy, new_energy - energy)
        if energy - new_energy < cfg.energy_tol and a.n_theta > 1:
            energy = new_energy
            warnings.warn("ADAPT-VQE energy stalled", VqeStallWarning, stacklevel=2)
            break
        energy = new_energy
    return a, energy
