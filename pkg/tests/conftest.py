import itertools
from functools import reduce

import numpy as np
import pytest

from avqds.ansatz import Ansatz
from avqds.pauli import PauliString, PauliSum

SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense(letters: str, phase: complex = 1.0) -> np.ndarray:
    """Kronecker-product oracle; qubit 0 is the least-significant bit, so it is the last factor."""
    mats = [SINGLE[ch] for ch in reversed(letters)]
    return phase * reduce(np.kron, mats)


def all_strings(n):
    return ["".join(t) for t in itertools.product("IXYZ", repeat=n)]


def random_state(rng, n):
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return psi / np.linalg.norm(psi)


def random_pauli(rng, n, allow_identity=False):
    while True:
        letters = "".join(rng.choice(list("IXYZ"), size=n))
        if allow_identity or set(letters) != {"I"}:
            return PauliString.from_letters(letters)


def random_hamiltonian(rng, n, n_terms=4):
    return PauliSum(n, tuple((rng.normal(), random_pauli(rng, n)) for _ in range(n_terms)))


def random_ansatz(rng, n, n_theta):
    gens = tuple(random_pauli(rng, n) for _ in range(n_theta))
    return Ansatz(random_state(rng, n), gens, rng.uniform(-np.pi, np.pi, n_theta))


def density_oracle(a: Ansatz, h: PauliSum, step=1e-5):
    """M, V and Tr[L^2] from finite differences of rho(theta) = |psi><psi|."""
    def rho(thetas):
        psi = a.with_thetas(thetas).evaluate()
        return np.outer(psi, psi.conj())

    drho = []
    for mu in range(a.n_theta):
        up, dn = a.thetas.copy(), a.thetas.copy()
        up[mu] += step
        dn[mu] -= step
        drho.append((rho(up) - rho(dn)) / (2 * step))
    r = rho(a.thetas)
    hm = h.matrix()
    lag = -1j * (hm @ r - r @ hm)
    M = np.array([[np.trace(x @ y).real for y in drho] for x in drho])
    V = np.array([np.trace(x @ lag).real for x in drho])
    return M, V, np.trace(lag @ lag).real


@pytest.fixture
def rng():
    return np.random.default_rng(20211104)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(label: str, checks: list[tuple[str, bool]]):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{text} [{'ok' if passed else 'FAIL'}]" for text, passed in checks)
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split("criterion ", 1)[1]):
            terminalreporter.write_line(line)
